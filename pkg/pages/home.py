import streamlit as st

from components.graph_view import GraphView
from config.settings import PAGES_CONFIG
from data.artifacts import ArtifactQueries


def render():
    """Render the dataset overview page"""

    st.title(PAGES_CONFIG["home"]["title"])
    st.markdown(f"### {PAGES_CONFIG['home']['description']}")

    queries = ArtifactQueries()
    view = GraphView()

    with st.spinner("📊 Loading dataset..."):
        summary = queries.get_summary()
    stats = summary["stats"]

    if stats["total_samples"] == 0:
        st.info("No graphs found. Run `cli.py extract` and `cli.py featurize` first.")
        return

    render_summary_metrics(stats)

    col1, col2 = st.columns([1, 2])
    with col1:
        st.subheader("Edges per class")
        st.plotly_chart(view.class_bar(stats), use_container_width=True)
    with col2:
        st.subheader("Node types")
        node_types = queries.get_node_types()
        if not node_types.empty:
            st.plotly_chart(view.node_type_bar(node_types), use_container_width=True)

    st.markdown("---")
    render_breakdowns(summary)


def render_summary_metrics(stats: dict):
    col1, col2, col3, col4, col5 = st.columns(5)
    with col1:
        st.metric(label="🧾 Graphs", value=f"{stats['total_samples']:,}")
    with col2:
        st.metric(label="🔵 Avg. Nodes", value=f"{stats['avg_nodes']:.2f}")
    with col3:
        st.metric(label="🌳 Avg. AST Edges", value=f"{stats['avg_ast_edges']:.2f}",
                  help="Always one less than the average node count")
    with col4:
        st.metric(label="➡️ Avg. CFG Edges", value=f"{stats['avg_cfg_edges']:.2f}")
    with col5:
        st.metric(label="🔁 Avg. DFG Edges", value=f"{stats['avg_dfg_edges']:.2f}")


def render_breakdowns(summary: dict):
    col1, col2 = st.columns([1, 2])
    with col1:
        st.markdown("#### Languages")
        for language, count in summary["languages"].items():
            st.markdown(f"- **{language}**: {count:,}")
    with col2:
        st.markdown("#### By code length")
        bins = summary["length_bins"]
        if bins:
            st.dataframe(
                {label: values for label, values in bins.items()},
                use_container_width=True,
            )
        else:
            st.caption("Needs at least three graphs")
