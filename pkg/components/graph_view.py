import pandas as pd
import plotly.express as px
import plotly.graph_objects as go
import streamlit as st

from config.settings import COLORS
from data.artifacts import edge_frame
from extract.serialize import serialize_graph_text


class GraphView:
    """Inspector widgets for a single code property graph"""

    def class_bar(self, stats: dict) -> go.Figure:
        frame = pd.DataFrame({
            "class": ["AST", "CFG", "DFG"],
            "average edges": [stats["avg_ast_edges"], stats["avg_cfg_edges"], stats["avg_dfg_edges"]],
        })
        figure = px.bar(frame, x="class", y="average edges", color="class",
                        color_discrete_map=COLORS["edge_class"])
        figure.update_layout(showlegend=False, height=320)
        return figure

    def node_type_bar(self, node_types: pd.DataFrame) -> go.Figure:
        figure = px.bar(node_types, x="node_type", y="count", color_discrete_sequence=[COLORS["primary"]])
        figure.update_layout(xaxis_tickangle=-45, height=380)
        return figure

    def render_source(self, graph):
        st.markdown("#### Source")
        st.code(graph.code or "", language=graph.language)

    def render_graph_text(self, graph):
        st.markdown("#### GraphText")
        st.code(serialize_graph_text(graph), language="text")

    def render_edge_table(self, graph):
        st.markdown("#### Edges")
        edges = edge_frame(graph)
        classes = st.multiselect(
            "Edge classes:", options=["AST", "CFG", "DFG"], default=["CFG", "DFG"],
            key="inspector_edge_classes",
        )
        st.dataframe(edges[edges["class"].isin(classes)], use_container_width=True, hide_index=True)
