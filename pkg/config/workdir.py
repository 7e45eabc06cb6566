import os
from pathlib import Path

import streamlit as st
from dotenv import load_dotenv

from config.settings import WORKDIR_LAYOUT

load_dotenv()


class WorkdirConfig:
    """Artifact directory the dashboard reads (CGB_WORKDIR, default the current directory)"""

    def __init__(self, root=None):
        self.root = Path(root or os.getenv("CGB_WORKDIR", "."))
        self.dataset = os.getenv("CGB_DATASET", "dataset")

    @property
    def reports_dir(self) -> Path:
        return self.root / WORKDIR_LAYOUT["reports"]

    @property
    def dataset_dir(self) -> Path:
        return self.root / self.dataset

    def test_workdir(self) -> bool:
        """Check the workdir exists and holds at least a dataset or a reports folder"""
        if not self.root.is_dir():
            st.error(f"❌ Workdir {self.root} does not exist. Set CGB_WORKDIR in your .env file.")
            return False
        if not (self.reports_dir.is_dir() or self.dataset_dir.is_dir()):
            st.warning(f"No reports or dataset found under {self.root}; run the cli pipeline first.")
        return True
