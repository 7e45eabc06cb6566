import math

import numpy as np
import torch
import torch.nn.functional as F

from config.taxonomy import EDGE_LABELS, NO_EDGE
from cge.augment import sample_negative_pairs
from utils.exceptions import DegenerateInput


def info_nce(logits: torch.Tensor) -> torch.Tensor:
    """Symmetric InfoNCE over an M x M score matrix whose diagonal holds the positives"""
    targets = torch.arange(logits.shape[0], device=logits.device)
    return 0.5 * (F.cross_entropy(logits, targets) + F.cross_entropy(logits.t(), targets))


def _normalize_rows(z: torch.Tensor, what: str) -> torch.Tensor:
    norms = z.norm(dim=-1, keepdim=True)
    if bool((norms == 0).any()):
        raise DegenerateInput(f"{what} has a zero-norm row")
    return z / norms


def graph_contrastive_loss(z1: torch.Tensor, z2: torch.Tensor, temperature: float) -> torch.Tensor:
    if z1.shape != z2.shape or z1.ndim != 2 or z1.shape[0] < 1:
        raise DegenerateInput(f"view embeddings must be matching M x d matrices, got {tuple(z1.shape)} and {tuple(z2.shape)}")
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    a = _normalize_rows(z1, "first view")
    b = _normalize_rows(z2, "second view")
    return info_nce(a @ b.t() / temperature)


def edge_pairs(edges, num_nodes: int, neg_ratio: float, rng: np.random.Generator):
    """(src, dst, label) arrays: every real edge labeled by its attr plus sampled NO_EDGE pairs"""
    wanted = int(math.ceil(neg_ratio * len(edges)))
    if neg_ratio > 0 and num_nodes < 2:
        raise DegenerateInput("negative edge sampling needs at least 2 nodes")
    negatives = sample_negative_pairs(num_nodes, edges, wanted, rng)
    src = [edge.src for edge in edges] + [u for u, _ in negatives]
    dst = [edge.dst for edge in edges] + [v for _, v in negatives]
    labels = [EDGE_LABELS[edge.attr] for edge in edges] + [NO_EDGE] * len(negatives)
    return np.array(src, dtype=np.int64), np.array(dst, dtype=np.int64), np.array(labels, dtype=np.int64)


def classify_edge_pairs(node_states, src, dst, labels, head):
    """Mean cross-entropy and accuracy of `head` on concatenated (h_src, h_dst) pairs"""
    if len(labels) == 0:
        raise DegenerateInput("no edge pairs to classify")
    src = torch.as_tensor(src, dtype=torch.long)
    dst = torch.as_tensor(dst, dtype=torch.long)
    labels = torch.as_tensor(labels, dtype=torch.long)
    logits = head(torch.cat([node_states[src], node_states[dst]], dim=-1))
    loss = F.cross_entropy(logits, labels)
    accuracy = (logits.argmax(dim=-1) == labels).to(torch.float64).mean()
    return loss, float(accuracy)


def edge_type_loss(node_states, edges, neg_ratio: float, seed: int, head):
    """Edge-type prediction on one graph; returns (loss, accuracy)"""
    rng = np.random.default_rng(seed)
    src, dst, labels = edge_pairs(edges, node_states.shape[0], neg_ratio, rng)
    return classify_edge_pairs(node_states, src, dst, labels, head)


def has_edge_pairs(fg) -> bool:
    return fg.num_nodes > 1 and len(fg.graph.edges) > 0


def batch_edge_type_loss(encoding, graphs, neg_ratio: float, seed: int, head):
    """
    Edge-type prediction pooled over every graph of a batch (node ids shifted
    per graph). Graphs with a single node or no edges contribute no pairs.
    """
    rng = np.random.default_rng(seed)
    srcs, dsts, labels = [], [], []
    offset = 0
    for fg in graphs:
        if has_edge_pairs(fg):
            src, dst, label = edge_pairs(fg.graph.edges, fg.num_nodes, neg_ratio, rng)
            srcs.append(src + offset)
            dsts.append(dst + offset)
            labels.append(label)
        offset += fg.num_nodes
    if not labels:
        raise DegenerateInput("no graph in the batch has edges to classify")
    return classify_edge_pairs(
        encoding.node_states, np.concatenate(srcs), np.concatenate(dsts), np.concatenate(labels), head
    )
