import pandas as pd
import plotly.express as px
import plotly.graph_objects as go
import streamlit as st

from config.settings import COLORS


class TraceChart:
    """Loss curves per objective for one training stage"""

    def build_figure(self, frame: pd.DataFrame, title: str) -> go.Figure:
        figure = px.line(
            frame, x="epoch", y="value", color="objective",
            color_discrete_map=COLORS["objective"], markers=len(frame["epoch"].unique()) < 30,
            title=title,
        )
        figure.update_layout(legend_title_text="objective", yaxis_title="loss / accuracy", height=380)
        return figure

    def render(self, traces: pd.DataFrame, stage: str):
        frame = traces[traces["stage"] == stage]
        if frame.empty:
            st.info(f"No trace recorded for {stage} yet")
            return
        st.plotly_chart(self.build_figure(frame, stage), use_container_width=True)

        final = frame[frame["epoch"] == frame["epoch"].max()]
        cols = st.columns(min(4, len(final)))
        for col, (_, row) in zip(cols, final.iterrows()):
            with col:
                st.metric(label=row["objective"], value=f"{row['value']:.4f}")


def gradcheck_style(frame: pd.DataFrame):
    """Color the pass column the way the rest of the dashboard colors status"""
    def color(value):
        return f"color: {COLORS['pass'] if value else COLORS['fail']}"

    return frame.style.map(color, subset=["passed"]).format({"max_rel_error": "{:.2e}"})
