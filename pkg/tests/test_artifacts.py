import json

from config.workdir import WorkdirConfig
from data.artifacts import ArtifactQueries, edge_frame, gradcheck_frame, node_type_frame, trace_frame
from extract.pipeline import extract_graph
from extract.types import SourceUnit


def graph_of(code: str):
    return extract_graph(SourceUnit(id="unit.py", language="python", code=code))


class TestFrames:
    def test_trace_frame_is_long(self):
        report = {"trace": {"epochs": [
            {"epoch": 0, "loss": 2.0, "gtc": 1.0, "lr": 1e-3},
            {"epoch": 1, "loss": 1.5, "gtc": 0.7, "lr": 1e-3},
        ]}}
        frame = trace_frame(report, "Stage 2")
        assert len(frame) == 4
        assert set(frame["objective"]) == {"loss", "gtc"}
        assert (frame["stage"] == "Stage 2").all()

    def test_trace_frame_without_trace(self):
        assert trace_frame({}, "Stage 1").empty

    def test_gradcheck_frame(self):
        reports = {
            "gradcheck_gtc": {"component": "gtc", "groups": {
                "layers.0": {"max_rel_error": 1e-7, "checked": 5, "passed": True},
                "log_tau": {"max_rel_error": 2.0, "checked": 1, "passed": False},
            }},
            "align": {"trace": {}},
        }
        frame = gradcheck_frame(reports)
        assert list(frame["group"]) == ["layers.0", "log_tau"]
        assert list(frame["passed"]) == [True, False]

    def test_edge_frame_names_endpoints(self):
        graph = graph_of("x = 1\n")
        frame = edge_frame(graph)
        assert len(frame) == len(graph.edges)
        first = frame.iloc[0]
        assert first["src_type"] == graph.nodes[first["src"]].node_type
        assert set(frame["class"]) <= {"AST", "CFG", "DFG"}

    def test_node_type_counts(self):
        frame = node_type_frame([graph_of("x = 1\n"), graph_of("y = 2\n")])
        counts = dict(zip(frame["node_type"], frame["count"]))
        assert counts["identifier"] == 2
        assert counts["module"] == 2


class TestQueries:
    def test_reports_read_from_workdir(self, tmp_path):
        (tmp_path / "reports").mkdir()
        (tmp_path / "reports" / "pretrain.json").write_text(json.dumps({"trace": {"epochs": [
            {"epoch": 0, "loss": 1.0, "contrastive": 0.5, "edge": 0.5, "edge_accuracy": 0.1, "lr": 1e-5},
        ]}}))
        queries = ArtifactQueries(WorkdirConfig(tmp_path))
        traces = queries.get_traces()
        assert set(traces["stage"]) == {"Stage 1"}
        assert len(traces) == 4

    def test_missing_dataset_gives_empty_summary(self, tmp_path):
        summary = ArtifactQueries(WorkdirConfig(tmp_path)).get_summary()
        assert summary["stats"]["total_samples"] == 0
        assert summary["languages"] == {}
