import pytest

from utils.gradcheck import COMPONENTS, TOLERANCE, group_of, relative_error, run_gradcheck


class TestHelpers:
    def test_relative_error_floor(self):
        assert relative_error(1e-6, 0.0) == pytest.approx(1e-3)
        assert relative_error(2.0, 1.0) == pytest.approx(0.5)

    @pytest.mark.parametrize("name, group", [
        ("layers.0.W_Q.weight", "layers.0"),
        ("edge_head.0.weight", "edge_head"),
        ("bridge.layers.1.ffn_q.0.weight", "bridge.layers.1"),
        ("encoder.norms.0.bias", "encoder.norms.0"),
        ("query_tokens", "query_tokens"),
        ("bridge.log_tau", "bridge.log_tau"),
    ])
    def test_group_names(self, name, group):
        assert group_of(name) == group


class TestComponents:
    @pytest.mark.parametrize("component", COMPONENTS)
    def test_component_passes(self, component):
        report = run_gradcheck(component, seed=0)
        worst = {name: g.max_rel_error for name, g in report.groups.items() if not g.passed}
        assert report.passed, f"groups above {TOLERANCE}: {worst}, invariants: {report.invariants}"
        assert all(g.checked > 0 for g in report.groups.values())

    def test_flipped_edge_head_is_caught(self):
        report = run_gradcheck("stage1", seed=0, inject_fault="edge_head")
        assert not report.passed
        assert report.failed_groups == ["edge_head"]

    def test_invariants_recorded(self):
        assert run_gradcheck("gtg", seed=1).invariants["causal"]["passed"]
        invariants = run_gradcheck("stage3", seed=1).invariants
        assert invariants["answer_mask"]["passed"] and invariants["frozen_decoder"]["passed"]

    def test_report_dict(self):
        data = run_gradcheck("gtc", seed=0).to_dict()
        assert data["component"] == "gtc"
        assert data["step"] == 1e-5 and data["tolerance"] == 1e-4
        assert all(set(g) == {"max_rel_error", "checked", "passed"} for g in data["groups"].values())

    def test_unknown_component(self):
        with pytest.raises(ValueError):
            run_gradcheck("stage4")
