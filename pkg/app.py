import streamlit as st

from config.settings import APP_CONFIG, PAGES_CONFIG
from config.workdir import WorkdirConfig
from pages import home, inspector, training

st.set_page_config(
    page_title=APP_CONFIG["page_title"],
    page_icon=APP_CONFIG["page_icon"],
    layout=APP_CONFIG["layout"],
    initial_sidebar_state=APP_CONFIG["initial_sidebar_state"]
)

PAGES = {
    PAGES_CONFIG["home"]["title"]: home,
    PAGES_CONFIG["training"]["title"]: training,
    PAGES_CONFIG["inspector"]["title"]: inspector,
}


def initialize_workdir():
    """Check the artifact workdir once per session"""
    if 'workdir_checked' not in st.session_state:
        config = WorkdirConfig()
        if config.test_workdir():
            st.session_state.workdir_checked = True
            st.session_state.workdir_config = config
        else:
            st.stop()


def main():
    """Main application entry point with page navigation"""

    initialize_workdir()

    st.sidebar.markdown("## Code Graph Bridge")
    st.sidebar.caption(f"Workdir: {st.session_state.workdir_config.root}")

    page = st.sidebar.selectbox(
        "Select Page:",
        options=list(PAGES),
        help="Navigate between dataset, training and graph views"
    )
    PAGES[page].render()


if __name__ == "__main__":
    main()
