from dataclasses import asdict, dataclass
from pathlib import Path

import pandas as pd

from config.settings import WORKDIR_LAYOUT
from data.store import read_graphs_jsonl

LENGTH_BINS = ("short", "medium", "long")


@dataclass(frozen=True)
class DatasetStats:
    total_samples: int
    avg_nodes: float
    avg_ast_edges: float
    avg_cfg_edges: float
    avg_dfg_edges: float

    def to_dict(self) -> dict:
        return asdict(self)


def graph_frame(graphs) -> pd.DataFrame:
    """One row per graph: id, language, code lines and per-class counts"""
    rows = []
    for graph in graphs:
        counts = graph.count_by_class()
        rows.append({
            "id": graph.source_id,
            "language": graph.language,
            "lines": len(graph.code.splitlines()) if graph.code else 0,
            "nodes": len(graph.nodes),
            "ast_edges": counts["AST"],
            "cfg_edges": counts["CFG"],
            "dfg_edges": counts["DFG"],
        })
    return pd.DataFrame(rows, columns=["id", "language", "lines", "nodes", "ast_edges", "cfg_edges", "dfg_edges"])


def stats_from_frame(frame: pd.DataFrame) -> DatasetStats:
    if frame.empty:
        return DatasetStats(0, 0.0, 0.0, 0.0, 0.0)
    means = frame[["nodes", "cfg_edges", "dfg_edges"]].mean()
    avg_nodes = float(means["nodes"])
    # offset from the node mean, so a corpus of trees gives exactly avg_nodes - 1
    tree_gap = float((frame["nodes"] - frame["ast_edges"]).mean())
    return DatasetStats(
        total_samples=int(len(frame)),
        avg_nodes=avg_nodes,
        avg_ast_edges=avg_nodes - tree_gap,
        avg_cfg_edges=float(means["cfg_edges"]),
        avg_dfg_edges=float(means["dfg_edges"]),
    )


def dataset_stats(path) -> DatasetStats:
    """Means over all graphs of a dataset directory (or a bare graphs.jsonl)"""
    path = Path(path)
    graphs_file = path / WORKDIR_LAYOUT["graphs_file"] if path.is_dir() else path
    return stats_from_frame(graph_frame(read_graphs_jsonl(graphs_file)))


def length_breakdown(frame: pd.DataFrame) -> dict:
    """Averages per code-length tertile, using line count as the complexity proxy"""
    if len(frame) < len(LENGTH_BINS):
        return {}
    ranked = frame["lines"].rank(method="first")
    bins = pd.qcut(ranked, q=len(LENGTH_BINS), labels=LENGTH_BINS)
    return {
        str(label): stats_from_frame(frame[bins == label]).to_dict()
        for label in LENGTH_BINS
    }


def language_counts(frame: pd.DataFrame) -> dict:
    return {str(k): int(v) for k, v in frame["language"].value_counts().sort_index().items()}
