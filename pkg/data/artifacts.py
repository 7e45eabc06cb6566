import json
from pathlib import Path

import pandas as pd
import streamlit as st

from config.settings import CACHE_CONFIG, WORKDIR_LAYOUT
from config.workdir import WorkdirConfig
from data.stats import graph_frame, language_counts, length_breakdown, stats_from_frame
from data.store import read_graphs_jsonl

TRACE_COLUMNS = ["stage", "epoch", "objective", "value"]
GRADCHECK_COLUMNS = ["component", "group", "max_rel_error", "checked", "passed"]
STAGE_REPORTS = {"pretrain": "Stage 1", "align": "Stage 2", "adapt": "Stage 3"}


def trace_frame(report: dict, stage: str) -> pd.DataFrame:
    """Long frame of one report's loss trace: a row per (epoch, objective)"""
    rows = [
        {"stage": stage, "epoch": entry["epoch"], "objective": key, "value": value}
        for entry in report.get("trace", {}).get("epochs", [])
        for key, value in entry.items()
        if key not in ("epoch", "lr")
    ]
    return pd.DataFrame(rows, columns=TRACE_COLUMNS)


def gradcheck_frame(reports: dict) -> pd.DataFrame:
    rows = [
        {"component": report["component"], "group": group, **result}
        for name, report in sorted(reports.items()) if name.startswith("gradcheck_")
        for group, result in report.get("groups", {}).items()
    ]
    return pd.DataFrame(rows, columns=GRADCHECK_COLUMNS)


def node_type_frame(graphs) -> pd.DataFrame:
    types = pd.Series([node.node_type for graph in graphs for node in graph.nodes], dtype="object")
    counts = types.value_counts()
    return pd.DataFrame({"node_type": counts.index.astype(str), "count": counts.values.astype(int)})


def edge_frame(graph) -> pd.DataFrame:
    nodes = graph.nodes
    rows = [
        {
            "src": edge.src, "src_type": nodes[edge.src].node_type,
            "dst": edge.dst, "dst_type": nodes[edge.dst].node_type,
            "class": edge.edge_class, "attr": edge.attr,
        }
        for edge in graph.edges
    ]
    return pd.DataFrame(rows, columns=["src", "src_type", "dst", "dst_type", "class", "attr"])


class ArtifactQueries:
    """Cached reads of pipeline artifacts with error handling

    Cached readers take the artifact path as an argument so a change of
    workdir is a cache miss.
    """

    def __init__(self, config=None):
        self.config = config or WorkdirConfig()

    @property
    def graphs_file(self) -> str:
        return str(self.config.dataset_dir / WORKDIR_LAYOUT["graphs_file"])

    @st.cache_data(ttl=CACHE_CONFIG["dataset_ttl"])
    def _graph_frame(_self, graphs_file: str) -> pd.DataFrame:
        try:
            return graph_frame(read_graphs_jsonl(graphs_file))
        except Exception as e:
            st.error(f"❌ Error loading dataset: {str(e)}")
            return graph_frame([])

    def get_graph_frame(self) -> pd.DataFrame:
        """Per-graph sizes and edge counts of the dataset"""
        return self._graph_frame(self.graphs_file)

    @st.cache_data(ttl=CACHE_CONFIG["dataset_ttl"])
    def _node_types(_self, graphs_file: str) -> pd.DataFrame:
        try:
            return node_type_frame(read_graphs_jsonl(graphs_file))
        except Exception as e:
            st.error(f"❌ Error loading node types: {str(e)}")
            return pd.DataFrame(columns=["node_type", "count"])

    def get_node_types(self) -> pd.DataFrame:
        return self._node_types(self.graphs_file)

    def get_summary(self) -> dict:
        frame = self.get_graph_frame()
        return {
            "stats": stats_from_frame(frame).to_dict(),
            "languages": language_counts(frame) if not frame.empty else {},
            "length_bins": length_breakdown(frame),
        }

    @st.cache_data(ttl=CACHE_CONFIG["dataset_ttl"])
    def _graph(_self, graphs_file: str, source_id: str):
        try:
            for graph in read_graphs_jsonl(graphs_file):
                if graph.source_id == source_id:
                    return graph
            st.warning(f"Graph {source_id} not found in dataset")
        except Exception as e:
            st.error(f"❌ Error loading graph: {str(e)}")
        return None

    def get_graph(self, source_id: str):
        return self._graph(self.graphs_file, source_id)

    @st.cache_data(ttl=CACHE_CONFIG["report_ttl"])
    def _reports(_self, reports_dir: str) -> dict:
        reports = {}
        directory = Path(reports_dir)
        if not directory.is_dir():
            return reports
        for path in sorted(directory.glob("*.json")):
            try:
                reports[path.stem] = json.loads(path.read_text(encoding="utf-8"))
            except Exception as e:
                st.warning(f"Skipping unreadable report {path.name}: {str(e)}")
        return reports

    def get_reports(self) -> dict:
        """Every JSON report under <workdir>/reports keyed by file stem"""
        return self._reports(str(self.config.reports_dir))

    def get_traces(self) -> pd.DataFrame:
        reports = self.get_reports()
        frames = [trace_frame(reports[name], stage) for name, stage in STAGE_REPORTS.items() if name in reports]
        frames = [f for f in frames if not f.empty]
        return pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=TRACE_COLUMNS)

    def get_gradchecks(self) -> pd.DataFrame:
        return gradcheck_frame(self.get_reports())
