from dataclasses import replace

import numpy as np

from data.features import FeaturedGraph


def augment_view(fg: FeaturedGraph, node_drop_rate: float, edge_drop_rate: float, seed: int) -> FeaturedGraph:
    """
    Random view of a graph for contrastive pretraining: node feature rows are
    zeroed and edges removed independently at the given rates. The AST tree
    shape is not kept; views only feed the encoder.
    """
    for rate in (node_drop_rate, edge_drop_rate):
        if not 0.0 <= rate < 1.0:
            raise ValueError(f"drop rate {rate} is outside [0, 1)")
    rng = np.random.default_rng(seed)
    node_mask = rng.random(fg.num_nodes) < node_drop_rate
    keep = rng.random(len(fg.graph.edges)) >= edge_drop_rate

    node_features = fg.node_features.copy()
    node_features[node_mask] = 0.0
    kept_edges = tuple(edge for edge, k in zip(fg.graph.edges, keep) if k)
    graph = replace(fg.graph, edges=kept_edges)
    return FeaturedGraph(graph=graph, node_features=node_features, edge_features=fg.edge_features[keep])


def sample_negative_pairs(num_nodes: int, edges, count: int, rng: np.random.Generator) -> list:
    """
    `count` ordered pairs (u, v), u != v, with no edge u -> v of any class.
    Uniform over the non-adjacent pairs; fewer are returned only when the
    graph has fewer such pairs.
    """
    if count <= 0 or num_nodes < 2:
        return []
    adjacent = {(edge.src, edge.dst) for edge in edges}
    available = num_nodes * (num_nodes - 1) - len({pair for pair in adjacent if pair[0] != pair[1]})
    if available <= 2 * count:
        candidates = [
            (u, v) for u in range(num_nodes) for v in range(num_nodes)
            if u != v and (u, v) not in adjacent
        ]
        if len(candidates) <= count:
            return candidates
        chosen = rng.choice(len(candidates), size=count, replace=False)
        return [candidates[i] for i in sorted(chosen)]

    pairs, seen = [], set()
    while len(pairs) < count:
        u, v = (int(x) for x in rng.integers(num_nodes, size=2))
        if u == v or (u, v) in adjacent or (u, v) in seen:
            continue
        seen.add((u, v))
        pairs.append((u, v))
    return pairs
