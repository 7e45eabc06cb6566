import json
from pathlib import Path

from loguru import logger

from config.settings import WORKDIR_LAYOUT
from data.cgfb import read_sections, write_sections
from data.features import FeaturedGraph
from extract.types import CodePropertyGraph
from utils.exceptions import DimensionMismatch, FormatError


def write_graphs_jsonl(graphs, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for graph in graphs:
            handle.write(json.dumps(graph.to_dict(), ensure_ascii=False) + "\n")


def read_graphs_jsonl(path) -> list:
    graphs = []
    with open(path, encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                graphs.append(CodePropertyGraph.from_dict(json.loads(line)))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
                raise FormatError(f"{path}:{line_number}: malformed graph record ({e})")
    return graphs


def persist_dataset(graphs, path) -> None:
    """Write graphs.jsonl plus node/edge feature files with one CGFB record per graph"""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    write_graphs_jsonl([fg.graph for fg in graphs], path / WORKDIR_LAYOUT["graphs_file"])
    write_sections(path / WORKDIR_LAYOUT["node_features"], [fg.node_features for fg in graphs])
    write_sections(path / WORKDIR_LAYOUT["edge_features"], [fg.edge_features for fg in graphs])
    logger.info(f"persisted {len(graphs)} featured graphs to {path}")


def load_dataset(path) -> list:
    path = Path(path)
    graphs = read_graphs_jsonl(path / WORKDIR_LAYOUT["graphs_file"])
    node_sections = read_sections(path / WORKDIR_LAYOUT["node_features"])
    edge_sections = read_sections(path / WORKDIR_LAYOUT["edge_features"])
    if not len(graphs) == len(node_sections) == len(edge_sections):
        raise FormatError(
            f"{len(graphs)} graphs but {len(node_sections)} node and {len(edge_sections)} edge feature records"
        )
    try:
        return [
            FeaturedGraph(graph=graph, node_features=nodes, edge_features=edges)
            for graph, nodes, edges in zip(graphs, node_sections, edge_sections)
        ]
    except (ValueError, DimensionMismatch) as e:
        raise FormatError(str(e))
