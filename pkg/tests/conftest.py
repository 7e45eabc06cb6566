import json
from pathlib import Path

import numpy as np
import pytest
import torch

from config.pipeline import PipelineConfig
from data.features import encode_features
from data.synthetic import generate_corpus
from extract.pipeline import extract_graph
from extract.types import SourceUnit

GOLD_DIR = Path(__file__).parent / "gold"

TINY_CONFIG = {
    "features.dim": 16,
    "cge.in_dim": 16, "cge.hidden": 16, "cge.out_dim": 16, "cge.layers": 2, "cge.heads": 2,
    "cge.dropout": 0.0, "cge.edge_head_hidden": 16, "cge.batch_size": 16, "cge.epochs": 2, "cge.lr": 1e-3,
    "bridge.d_model": 16, "bridge.heads": 2, "bridge.ffn": 32, "bridge.layers": 2, "bridge.queries": 4,
    "bridge.max_len": 128, "bridge.dropout": 0.0, "bridge.batch_size": 8, "bridge.epochs": 1, "bridge.lr": 1e-3,
    "decoder.d_llm": 16, "decoder.heads": 2, "decoder.layers": 1, "decoder.context": 512, "decoder.epochs": 1,
    "stage3.batch_size": 4, "stage3.epochs": 1, "stage3.lr": 1e-3, "stage3.max_new_tokens": 8,
}


@pytest.fixture(autouse=True)
def _no_env_seed(monkeypatch):
    monkeypatch.delenv("CGB_SEED", raising=False)


@pytest.fixture(autouse=True)
def _deterministic_torch():
    torch.manual_seed(0)
    yield


def tiny_config(**overrides) -> PipelineConfig:
    return PipelineConfig({**TINY_CONFIG, **overrides})


@pytest.fixture
def config():
    return tiny_config()


def load_gold():
    """(name, SourceUnit, {"cfg": [...], "dfg": [...]}) for every gold file"""
    edges = json.loads((GOLD_DIR / "edges.json").read_text(encoding="utf-8"))
    return [
        (name, SourceUnit(id=name, language="python", code=(GOLD_DIR / name).read_text(encoding="utf-8")), gold)
        for name, gold in sorted(edges.items())
    ]


def locate(graph, locator) -> int:
    """Node id for a (node_type, text, occurrence) locator"""
    node_type, text, occurrence = locator
    matches = [node.id for node in graph.nodes if node.node_type == node_type and node.text == text]
    if occurrence >= len(matches):
        raise AssertionError(f"no occurrence {occurrence} of {node_type} '{text}' ({len(matches)} found)")
    return matches[occurrence]


def gold_edge_set(graph, entries) -> set:
    return {(locate(graph, src), locate(graph, dst), attr) for src, dst, attr in entries}


def edge_set(graph, edge_class: str) -> set:
    return {(edge.src, edge.dst, edge.attr) for edge in graph.edges_of(edge_class)}


@pytest.fixture(scope="session")
def gold_units():
    return load_gold()


def featured_corpus(count: int, seed: int = 0, dim: int = 16, distinct: bool = True) -> list:
    programs = generate_corpus(count, seed, distinct_templates=distinct)
    return [encode_features(extract_graph(p.unit), dim) for p in programs]


@pytest.fixture(scope="session")
def small_corpus():
    return featured_corpus(8)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
