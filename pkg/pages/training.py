import streamlit as st

from components.trace_chart import TraceChart, gradcheck_style
from config.settings import PAGES_CONFIG
from data.artifacts import STAGE_REPORTS, ArtifactQueries


def render():
    """Render loss traces, alignment metrics and gradient-check results"""

    st.title(PAGES_CONFIG["training"]["title"])
    st.markdown(f"### {PAGES_CONFIG['training']['description']}")

    queries = ArtifactQueries()
    reports = queries.get_reports()
    if not reports:
        st.info("No reports yet. Training commands write them to <workdir>/reports.")
        return

    chart = TraceChart()
    traces = queries.get_traces()
    for name, stage in STAGE_REPORTS.items():
        st.subheader(stage)
        chart.render(traces, stage)
        if name == "align" and name in reports:
            render_alignment(reports[name])
        if name == "adapt" and name in reports:
            render_adaptation(reports[name])
        st.markdown("---")

    st.subheader("🧮 Gradient checks")
    gradchecks = queries.get_gradchecks()
    if gradchecks.empty:
        st.info("Run `cli.py gradcheck` to fill this table")
    else:
        failed = int((~gradchecks["passed"].astype(bool)).sum())
        if failed:
            st.error(f"{failed} parameter group(s) exceed the tolerance")
        else:
            st.success("All parameter groups within tolerance")
        st.dataframe(gradcheck_style(gradchecks), use_container_width=True, hide_index=True)


def render_alignment(report: dict):
    evaluation = report.get("evaluation", {})
    col1, col2, col3 = st.columns(3)
    with col1:
        st.metric(label="🎯 Retrieval R@1", value=f"{evaluation.get('recall_at_1', 0):.3f}")
    with col2:
        st.metric(label="✅ Matching accuracy", value=f"{evaluation.get('gtm_accuracy', 0):.3f}")
    with col3:
        enabled = [k for k, v in report.get("objectives", {}).items() if v]
        st.metric(label="Objectives", value=" + ".join(o.upper() for o in enabled) or "none")


def render_adaptation(report: dict):
    before, after = report.get("nll_before"), report.get("nll_after")
    col1, col2 = st.columns(2)
    with col1:
        if before is not None and after is not None:
            st.metric(label="📉 Answer NLL", value=f"{after:.3f}", delta=f"{after - before:+.3f}",
                      delta_color="inverse")
    with col2:
        st.metric(label="🔒 Decoder checksum", value=report.get("decoder_checksum", "")[:12])
