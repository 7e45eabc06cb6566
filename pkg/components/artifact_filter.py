from typing import Dict, Optional

import streamlit as st

from data.artifacts import ArtifactQueries


class ArtifactFilter:
    """Sidebar selection of one graph of the dataset, narrowed by language"""

    def __init__(self, queries: Optional[ArtifactQueries] = None):
        self.queries = queries or ArtifactQueries()
        self._initialize_session_state()

    def _initialize_session_state(self):
        if "selected_graph" not in st.session_state:
            st.session_state.selected_graph = None

    def render_sidebar_filter(self) -> Dict[str, Optional[str]]:
        st.sidebar.markdown("### Filter")
        selection = {"language": None, "graph_id": None}

        frame = self.queries.get_graph_frame()
        if frame.empty:
            st.sidebar.info("Dataset is empty")
            return selection

        languages = sorted(frame["language"].unique().tolist())
        language = st.sidebar.selectbox(
            "Language:", options=["All languages"] + languages, key="language_selector",
        )
        if language != "All languages":
            selection["language"] = language
            frame = frame[frame["language"] == language]

        graph_id = st.sidebar.selectbox(
            "Graph:", options=frame["id"].tolist(), key="graph_selector",
            help="Source id of the graph to inspect",
        )
        selection["graph_id"] = graph_id
        st.session_state.selected_graph = graph_id

        row = frame[frame["id"] == graph_id]
        if not row.empty:
            st.sidebar.caption(
                f"{int(row['nodes'].iloc[0])} nodes · {int(row['cfg_edges'].iloc[0])} CFG · "
                f"{int(row['dfg_edges'].iloc[0])} DFG edges"
            )
        return selection
