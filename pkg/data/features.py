import hashlib
import re
from dataclasses import dataclass

import numpy as np

from data.cgfb import read_sections
from extract.types import CodePropertyGraph
from utils.exceptions import DimensionMismatch

SUBTOKEN_PATTERN = re.compile(r"[A-Z]+(?![a-z])|[A-Z]?[a-z]+|\d+|[^\sA-Za-z\d_]")


@dataclass
class FeaturedGraph:
    graph: CodePropertyGraph
    node_features: np.ndarray
    edge_features: np.ndarray

    def __post_init__(self):
        if self.node_features.shape[0] != len(self.graph.nodes):
            raise DimensionMismatch(
                f"{self.node_features.shape[0]} node rows for {len(self.graph.nodes)} nodes"
            )
        if self.edge_features.shape[0] != len(self.graph.edges):
            raise DimensionMismatch(
                f"{self.edge_features.shape[0]} edge rows for {len(self.graph.edges)} edges"
            )
        if self.node_features.shape[1] != self.edge_features.shape[1]:
            raise DimensionMismatch("node and edge features have different widths")
        if not (np.isfinite(self.node_features).all() and np.isfinite(self.edge_features).all()):
            raise ValueError(f"non-finite features in graph '{self.graph.source_id}'")

    @property
    def feature_dim(self) -> int:
        return int(self.node_features.shape[1])

    @property
    def num_nodes(self) -> int:
        return len(self.graph.nodes)


def subtokens(text: str) -> list:
    """Lower-cased camelCase / snake_case pieces plus punctuation symbols"""
    return [token.lower() for token in SUBTOKEN_PATTERN.findall(text)]


def embed_text(text: str, dim: int) -> np.ndarray:
    """Signed feature hashing of subtokens, L2-normalized (zero vector for empty text)"""
    if dim < 1:
        raise ValueError("embedding dim must be >= 1")
    vector = np.zeros(dim, dtype=np.float64)
    for token in subtokens(text):
        digest = int.from_bytes(hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest(), "little")
        sign = 1.0 if (digest >> 63) & 1 else -1.0
        vector[digest % dim] += sign
    norm = np.linalg.norm(vector)
    if norm > 0:
        vector /= norm
    return vector.astype(np.float32)


def _load_sidecar(path, rows: int, dim: int, what: str) -> np.ndarray:
    sections = read_sections(path)
    if len(sections) != 1:
        raise DimensionMismatch(f"{what} sidecar holds {len(sections)} matrices, expected 1")
    matrix = sections[0]
    if matrix.shape != (rows, dim):
        raise DimensionMismatch(f"{what} sidecar is {matrix.shape[0]}x{matrix.shape[1]}, graph needs {rows}x{dim}")
    return matrix


def encode_features(graph: CodePropertyGraph, dim: int, node_sidecar=None, edge_sidecar=None) -> FeaturedGraph:
    if node_sidecar is not None:
        node_features = _load_sidecar(node_sidecar, len(graph.nodes), dim, "node")
    else:
        cache = {}
        rows = []
        for node in graph.nodes:
            key = f"{node.node_type} {node.text}"
            if key not in cache:
                cache[key] = embed_text(key, dim)
            rows.append(cache[key])
        node_features = np.stack(rows) if rows else np.zeros((0, dim), dtype=np.float32)

    if edge_sidecar is not None:
        edge_features = _load_sidecar(edge_sidecar, len(graph.edges), dim, "edge")
    else:
        by_attr = {}
        rows = []
        for edge in graph.edges:
            if edge.attr not in by_attr:
                by_attr[edge.attr] = embed_text(edge.attr, dim)
            rows.append(by_attr[edge.attr])
        edge_features = np.stack(rows) if rows else np.zeros((0, dim), dtype=np.float32)

    return FeaturedGraph(graph=graph, node_features=node_features, edge_features=edge_features)
