"""
Edge-conditioned graph transformer encoder

Each layer scores every in-edge j -> i per head as
(W_Q h_i) . (W_K h_j + W_E e_ji) / sqrt(d_k), normalizes the scores over the
in-neighborhood of i, and aggregates W_val h_j + W_E e_ji on top of a
W_self h_i skip term. Graphs are batched as one disjoint union.
"""
import math
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from config.taxonomy import EDGE_LABELS, NUM_EDGE_LABELS
from utils.exceptions import ShapeError


def segment_softmax(scores: torch.Tensor, index: torch.Tensor, num_segments: int) -> torch.Tensor:
    """Softmax of scores (E x H) within groups of rows sharing the same index"""
    expanded = index.unsqueeze(-1).expand_as(scores)
    peak = torch.full((num_segments, scores.shape[1]), -math.inf, dtype=scores.dtype, device=scores.device)
    peak = peak.scatter_reduce(0, expanded, scores, reduce="amax", include_self=True).detach()
    exp = torch.exp(scores - peak[index])
    denom = torch.zeros(num_segments, scores.shape[1], dtype=scores.dtype, device=scores.device)
    denom = denom.index_add(0, index, exp)
    return exp / denom[index]


class GraphTransformerLayer(nn.Module):
    def __init__(self, in_dim: int, out_dim: int, edge_dim: int, heads: int):
        super().__init__()
        if out_dim % heads:
            raise ShapeError(f"layer width {out_dim} is not divisible by {heads} heads")
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.edge_dim = edge_dim
        self.heads = heads
        self.d_k = out_dim // heads
        self.W_Q = nn.Linear(in_dim, out_dim, bias=False)
        self.W_K = nn.Linear(in_dim, out_dim, bias=False)
        self.W_val = nn.Linear(in_dim, out_dim, bias=False)
        self.W_self = nn.Linear(in_dim, out_dim, bias=False)
        self.W_E = nn.Linear(edge_dim, out_dim, bias=False)

    def forward(self, h, src, dst, edge_features, return_attention: bool = False):
        if h.shape[-1] != self.in_dim:
            raise ShapeError(f"node states have width {h.shape[-1]}, layer expects {self.in_dim}")
        if edge_features.shape != (src.shape[0], self.edge_dim):
            raise ShapeError(
                f"edge features {tuple(edge_features.shape)} do not match {src.shape[0]} edges of width {self.edge_dim}"
            )
        n = h.shape[0]
        q = self.W_Q(h).view(n, self.heads, self.d_k)
        k = self.W_K(h).view(n, self.heads, self.d_k)
        v = self.W_val(h).view(n, self.heads, self.d_k)
        e = self.W_E(edge_features).view(-1, self.heads, self.d_k)

        scores = (q[dst] * (k[src] + e)).sum(-1) / math.sqrt(self.d_k)
        alpha = segment_softmax(scores, dst, n)
        messages = alpha.unsqueeze(-1) * (v[src] + e)
        aggregated = torch.zeros(n, self.heads, self.d_k, dtype=h.dtype, device=h.device)
        aggregated = aggregated.index_add(0, dst, messages)

        out = self.W_self(h) + aggregated.reshape(n, self.out_dim)
        if return_attention:
            return out, alpha
        return out


@dataclass
class GraphBatch:
    """Disjoint union of featured graphs with per-node graph membership"""
    x: torch.Tensor
    src: torch.Tensor
    dst: torch.Tensor
    edge_features: torch.Tensor
    edge_labels: torch.Tensor
    graph_index: torch.Tensor
    node_counts: list
    edge_counts: list

    @property
    def num_graphs(self) -> int:
        return len(self.node_counts)

    @property
    def node_offsets(self) -> list:
        return np.concatenate([[0], np.cumsum(self.node_counts)[:-1]]).astype(int).tolist()

    @classmethod
    def from_featured(cls, graphs, dtype=torch.float32) -> "GraphBatch":
        xs, efs, srcs, dsts, labels, index = [], [], [], [], [], []
        offset = 0
        for position, fg in enumerate(graphs):
            xs.append(torch.as_tensor(fg.node_features, dtype=dtype))
            efs.append(torch.as_tensor(fg.edge_features, dtype=dtype))
            srcs.extend(edge.src + offset for edge in fg.graph.edges)
            dsts.extend(edge.dst + offset for edge in fg.graph.edges)
            labels.extend(EDGE_LABELS[edge.attr] for edge in fg.graph.edges)
            index.extend([position] * fg.num_nodes)
            offset += fg.num_nodes
        return cls(
            x=torch.cat(xs),
            src=torch.tensor(srcs, dtype=torch.long),
            dst=torch.tensor(dsts, dtype=torch.long),
            edge_features=torch.cat(efs),
            edge_labels=torch.tensor(labels, dtype=torch.long),
            graph_index=torch.tensor(index, dtype=torch.long),
            node_counts=[fg.num_nodes for fg in graphs],
            edge_counts=[len(fg.graph.edges) for fg in graphs],
        )


@dataclass
class GraphEncoding:
    node_states: torch.Tensor
    pooled: torch.Tensor
    graph_index: torch.Tensor

    def states_of(self, position: int) -> torch.Tensor:
        return self.node_states[self.graph_index == position]


def mean_pool(states: torch.Tensor, graph_index: torch.Tensor, num_graphs: int) -> torch.Tensor:
    sums = torch.zeros(num_graphs, states.shape[1], dtype=states.dtype, device=states.device)
    sums = sums.index_add(0, graph_index, states)
    counts = torch.bincount(graph_index, minlength=num_graphs).to(states.dtype).clamp(min=1)
    return sums / counts.unsqueeze(-1)


class CodeGraphEncoder(nn.Module):
    def __init__(self, in_dim=768, hidden=1024, out_dim=768, layers=2, heads=4,
                 dropout=0.1, norm="batch", edge_head_hidden=256):
        super().__init__()
        if layers < 1:
            raise ShapeError("encoder needs at least one layer")
        widths = [in_dim] + [hidden] * (layers - 1) + [out_dim]
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.layers = nn.ModuleList(
            GraphTransformerLayer(widths[i], widths[i + 1], in_dim, heads) for i in range(layers)
        )
        make_norm = nn.BatchNorm1d if norm == "batch" else nn.LayerNorm
        self.norms = nn.ModuleList(make_norm(hidden) for _ in range(layers - 1))
        self.dropout = nn.Dropout(dropout)
        self.edge_head = nn.Sequential(
            nn.Linear(2 * out_dim, edge_head_hidden),
            nn.ReLU(),
            nn.Linear(edge_head_hidden, NUM_EDGE_LABELS),
        )

    @classmethod
    def from_config(cls, config) -> "CodeGraphEncoder":
        return cls(
            in_dim=config["cge.in_dim"], hidden=config["cge.hidden"], out_dim=config["cge.out_dim"],
            layers=config["cge.layers"], heads=config["cge.heads"], dropout=config["cge.dropout"],
            norm=config["cge.norm"], edge_head_hidden=config["cge.edge_head_hidden"],
        )

    def forward(self, batch: GraphBatch) -> GraphEncoding:
        if batch.x.shape[1] != self.in_dim:
            raise ShapeError(f"node features have width {batch.x.shape[1]}, encoder expects {self.in_dim}")
        h = batch.x
        for i, layer in enumerate(self.layers):
            h = layer(h, batch.src, batch.dst, batch.edge_features)
            if i < len(self.norms):
                h = self.dropout(F.relu(self.norms[i](h)))
        return GraphEncoding(
            node_states=h,
            pooled=mean_pool(h, batch.graph_index, batch.num_graphs),
            graph_index=batch.graph_index,
        )

    def classify_pairs(self, node_states, src, dst) -> torch.Tensor:
        return self.edge_head(torch.cat([node_states[src], node_states[dst]], dim=-1))


def encode_graph(fg, model: CodeGraphEncoder, train: bool = False) -> GraphEncoding:
    """Encode one featured graph; pooled is the d_out vector of that graph"""
    dtype = next(model.parameters()).dtype
    model.train(train)
    encoding = model(GraphBatch.from_featured([fg], dtype=dtype))
    return GraphEncoding(node_states=encoding.node_states, pooled=encoding.pooled[0], graph_index=encoding.graph_index)
