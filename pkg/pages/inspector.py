import streamlit as st

from components.artifact_filter import ArtifactFilter
from components.graph_view import GraphView
from config.settings import PAGES_CONFIG
from data.artifacts import ArtifactQueries


def render():
    """Render the single-graph inspector"""

    st.title(PAGES_CONFIG["inspector"]["title"])

    queries = ArtifactQueries()
    selection = ArtifactFilter(queries).render_sidebar_filter()
    if not selection["graph_id"]:
        st.info("Select a graph from the sidebar")
        return

    graph = queries.get_graph(selection["graph_id"])
    if graph is None:
        return

    st.success(f"**Current Graph**: {graph.source_id} ({graph.language})")
    view = GraphView()
    col1, col2 = st.columns(2)
    with col1:
        view.render_source(graph)
    with col2:
        view.render_graph_text(graph)
    view.render_edge_table(graph)
