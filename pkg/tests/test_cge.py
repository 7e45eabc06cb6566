import math

import numpy as np
import pytest
import torch

from cge.augment import augment_view, sample_negative_pairs
from cge.losses import batch_edge_type_loss, edge_pairs, edge_type_loss, graph_contrastive_loss
from cge.model import CodeGraphEncoder, GraphBatch, GraphTransformerLayer, encode_graph, segment_softmax
from cge.training import stage1_loss, train_stage1
from config.taxonomy import NO_EDGE, NUM_EDGE_LABELS
from data.features import FeaturedGraph
from extract.types import CodePropertyGraph, CpgEdge, CpgNode
from tests.conftest import featured_corpus, tiny_config
from utils.exceptions import DegenerateInput, ShapeError


def path_graph_inputs(d: int = 4, seed: int = 0):
    rng = np.random.default_rng(seed)
    h = torch.tensor(rng.standard_normal((3, d)), dtype=torch.float64)
    src = torch.tensor([0, 1])
    dst = torch.tensor([1, 2])
    edges = torch.tensor(rng.standard_normal((2, d)), dtype=torch.float64)
    return h, src, dst, edges


def small_layer(d: int, heads: int, seed: int = 0) -> GraphTransformerLayer:
    torch.manual_seed(seed)
    layer = GraphTransformerLayer(d, d, d, heads).double()
    with torch.no_grad():
        for linear in (layer.W_Q, layer.W_K, layer.W_val, layer.W_self, layer.W_E):
            linear.weight.copy_(torch.eye(d, dtype=torch.float64) + 0.1 * torch.randn(d, d, dtype=torch.float64))
    return layer


def scalar_oracle(layer, h, src, dst, edges) -> np.ndarray:
    """Per-head, per-edge evaluation with plain Python loops"""
    W = {name: getattr(layer, name).weight.detach().numpy() for name in ("W_Q", "W_K", "W_val", "W_self", "W_E")}
    h, e = h.numpy(), edges.numpy()
    n, d_k = h.shape[0], layer.d_k
    out = h @ W["W_self"].T
    for i in range(n):
        incoming = [k for k in range(len(src)) if int(dst[k]) == i]
        for head in range(layer.heads):
            cols = slice(head * d_k, (head + 1) * d_k)
            scores = []
            for k in incoming:
                j = int(src[k])
                query = (W["W_Q"] @ h[i])[cols]
                key = (W["W_K"] @ h[j])[cols] + (W["W_E"] @ e[k])[cols]
                scores.append(sum(query[c] * key[c] for c in range(d_k)) / math.sqrt(d_k))
            if not scores:
                continue
            peak = max(scores)
            weights = [math.exp(s - peak) for s in scores]
            total = sum(weights)
            for weight, k in zip(weights, incoming):
                j = int(src[k])
                value = (W["W_val"] @ h[j])[cols] + (W["W_E"] @ e[k])[cols]
                out[i, cols] += weight / total * value
    return out


def line_graph(n: int, dim: int = 16, seed: int = 0) -> FeaturedGraph:
    rng = np.random.default_rng(seed)
    nodes = tuple(CpgNode(i, "module" if i == 0 else "identifier", f"v{i}", (0, 0)) for i in range(n))
    edges = tuple(CpgEdge(i - 1, i, "AST", "contains") for i in range(1, n)) + (
        CpgEdge(n - 1, 0, "CFG", "loop_back"), CpgEdge(1, n - 1, "DFG", "flows_to"),
    )
    return FeaturedGraph(
        CodePropertyGraph("line", nodes, edges),
        rng.standard_normal((n, dim)).astype(np.float32),
        rng.standard_normal((len(edges), dim)).astype(np.float32),
    )


def single_node_graph(dim: int = 16, seed: int = 0) -> FeaturedGraph:
    """What a comment-only source extracts to: the module node and nothing else"""
    rng = np.random.default_rng(seed)
    graph = CodePropertyGraph("note.py", (CpgNode(0, "module", "", (0, 7)),), ())
    return FeaturedGraph(graph, rng.standard_normal((1, dim)).astype(np.float32), np.zeros((0, dim), dtype=np.float32))


class TestSegmentSoftmax:
    def test_groups_sum_to_one(self):
        scores = torch.tensor([[1.0], [2.0], [3.0], [0.5]], dtype=torch.float64)
        index = torch.tensor([0, 0, 2, 2])
        alpha = segment_softmax(scores, index, 3)
        assert float(alpha[:2].sum()) == pytest.approx(1.0, abs=1e-12)
        assert float(alpha[2:].sum()) == pytest.approx(1.0, abs=1e-12)

    def test_large_scores_stay_finite(self):
        alpha = segment_softmax(torch.tensor([[1000.0], [1001.0]], dtype=torch.float64), torch.tensor([0, 0]), 1)
        assert torch.isfinite(alpha).all()


class TestGraphTransformerLayer:
    @pytest.mark.parametrize("heads", [1, 2])
    def test_matches_scalar_oracle(self, heads):
        layer = small_layer(4, heads)
        h, src, dst, edges = path_graph_inputs()
        out = layer(h, src, dst, edges).detach().numpy()
        assert np.allclose(out, scalar_oracle(layer, h, src, dst, edges), atol=1e-12, rtol=0)

    def test_isolated_node_keeps_self_term(self):
        layer = small_layer(4, 2)
        h, src, dst, edges = path_graph_inputs()
        out = layer(h, src, dst, edges)
        assert torch.equal(out[0], layer.W_self(h)[0])

    def test_single_neighbor_takes_full_weight(self):
        layer = small_layer(4, 2)
        h, src, dst, edges = path_graph_inputs()
        out, alpha = layer(h, src, dst, edges, return_attention=True)
        assert torch.allclose(alpha, torch.ones_like(alpha))
        expected = layer.W_self(h)[1] + layer.W_val(h)[0] + layer.W_E(edges)[0]
        assert torch.allclose(out[1], expected, atol=1e-12)

    def test_edge_feature_shape_checked(self):
        layer = small_layer(4, 2)
        h, src, dst, _ = path_graph_inputs()
        with pytest.raises(ShapeError):
            layer(h, src, dst, torch.zeros(3, 4, dtype=torch.float64))

    def test_heads_must_divide_width(self):
        with pytest.raises(ShapeError):
            GraphTransformerLayer(4, 6, 4, 4)


class TestEncoder:
    def test_pooled_shape(self, config):
        model = CodeGraphEncoder.from_config(config)
        encoding = encode_graph(line_graph(5), model)
        assert encoding.pooled.shape == (16,)
        assert encoding.node_states.shape == (5, 16)

    def test_permutation_invariance(self, config):
        model = CodeGraphEncoder.from_config(config).double().eval()
        fg = line_graph(6)
        perm = np.array([3, 0, 5, 1, 4, 2])
        inverse = np.argsort(perm)
        nodes = tuple(CpgNode(int(inverse[node.id]), node.node_type, node.text, node.span) for node in fg.graph.nodes)
        nodes = tuple(sorted(nodes, key=lambda node: node.id))
        edges = tuple(
            CpgEdge(int(inverse[e.src]), int(inverse[e.dst]), e.edge_class, e.attr) for e in fg.graph.edges
        )
        permuted = FeaturedGraph(CodePropertyGraph("perm", nodes, edges), fg.node_features[perm], fg.edge_features)

        with torch.no_grad():
            original = encode_graph(fg, model)
            moved = encode_graph(permuted, model)
        assert torch.allclose(original.pooled, moved.pooled, atol=1e-12, rtol=0)
        assert torch.allclose(original.node_states[perm], moved.node_states, atol=1e-12, rtol=0)

    def test_input_width_checked(self, config):
        model = CodeGraphEncoder.from_config(config)
        with pytest.raises(ShapeError):
            model(GraphBatch.from_featured([line_graph(4, dim=8)]))

    def test_layer_norm_variant(self):
        model = CodeGraphEncoder.from_config(tiny_config(**{"cge.norm": "layer"}))
        assert isinstance(model.norms[0], torch.nn.LayerNorm)


class TestContrastiveLoss:
    def test_orthonormal_closed_form(self):
        z = torch.eye(2, dtype=torch.float64)
        loss = graph_contrastive_loss(z, z.clone(), 1.0)
        assert float(loss) == pytest.approx(math.log(1 + math.exp(-1)), abs=1e-6)

    def test_single_graph_is_zero(self):
        z = torch.randn(1, 4, dtype=torch.float64)
        assert float(graph_contrastive_loss(z, z, 0.3)) == pytest.approx(0.0, abs=1e-12)

    def test_zero_row_rejected(self):
        with pytest.raises(DegenerateInput):
            graph_contrastive_loss(torch.zeros(2, 4), torch.ones(2, 4), 0.3)


class TestEdgeTypeLoss:
    def test_uniform_head_gives_log_labels(self, config):
        model = CodeGraphEncoder.from_config(config).double()
        with torch.no_grad():
            model.edge_head[2].weight.zero_()
            model.edge_head[2].bias.zero_()
        fg = line_graph(5)
        states = torch.randn(5, 16, dtype=torch.float64)
        loss, _ = edge_type_loss(states, fg.graph.edges, 0.5, 0, model.edge_head)
        assert float(loss) == pytest.approx(math.log(NUM_EDGE_LABELS), abs=1e-9)
        assert NUM_EDGE_LABELS == 31

    def test_negative_pairs_never_hit_edges(self, rng):
        for trial in range(20):
            fg = line_graph(int(rng.integers(3, 12)), seed=trial)
            pairs = sample_negative_pairs(fg.num_nodes, fg.graph.edges, 10, rng)
            adjacent = {(e.src, e.dst) for e in fg.graph.edges}
            assert all(u != v and (u, v) not in adjacent for u, v in pairs)
            assert len(set(pairs)) == len(pairs)

    def test_negative_count_follows_ratio(self, rng):
        fg = line_graph(10)
        _, _, labels = edge_pairs(fg.graph.edges, fg.num_nodes, 0.5, rng)
        assert int((labels == NO_EDGE).sum()) == math.ceil(0.5 * len(fg.graph.edges))

    def test_dense_graph_returns_what_exists(self, rng):
        edges = [CpgEdge(0, 1, "AST", "contains")]
        assert sample_negative_pairs(2, edges, 5, rng) == [(1, 0)]

    def test_single_node_with_negatives(self, rng):
        with pytest.raises(DegenerateInput):
            edge_pairs([], 1, 0.5, rng)

    def test_batch_skips_single_node_graphs(self, config):
        model = CodeGraphEncoder.from_config(config).eval()
        line, lone = line_graph(5), single_node_graph()
        with torch.no_grad():
            mixed = model(GraphBatch.from_featured([lone, line]))
            alone = model(GraphBatch.from_featured([line]))
            loss_mixed, accuracy_mixed = batch_edge_type_loss(mixed, [lone, line], 0.5, 3, model.edge_head)
            loss_alone, accuracy_alone = batch_edge_type_loss(alone, [line], 0.5, 3, model.edge_head)
        assert float(loss_mixed) == pytest.approx(float(loss_alone), rel=1e-5)
        assert accuracy_mixed == accuracy_alone

    def test_batch_without_edges(self, config):
        model = CodeGraphEncoder.from_config(config).eval()
        graphs = [single_node_graph(seed=1), single_node_graph(seed=2)]
        with torch.no_grad():
            encoding = model(GraphBatch.from_featured(graphs))
        with pytest.raises(DegenerateInput):
            batch_edge_type_loss(encoding, graphs, 0.5, 0, model.edge_head)


class TestAugment:
    def test_zero_rates_change_nothing(self):
        fg = line_graph(6)
        view = augment_view(fg, 0.0, 0.0, 1)
        assert view.graph.edges == fg.graph.edges
        assert np.array_equal(view.node_features, fg.node_features)

    def test_rate_bounds(self):
        with pytest.raises(ValueError):
            augment_view(line_graph(4), 1.0, 0.0, 0)

    def test_drop_count_within_binomial_interval(self):
        rng = np.random.default_rng(3)
        n = 400
        nodes = tuple(CpgNode(i, "identifier", "x", (0, 0)) for i in range(n))
        edges = tuple(
            CpgEdge(int(u), int(v), "DFG", "flows_to")
            for u, v in zip(rng.integers(n, size=1000), rng.integers(n, size=1000))
        )
        fg = FeaturedGraph(CodePropertyGraph("big", nodes, edges),
                           np.ones((n, 4), dtype=np.float32), np.ones((1000, 4), dtype=np.float32))
        view = augment_view(fg, 0.05, 0.05, 11)
        dropped_edges = 1000 - len(view.graph.edges)
        dropped_nodes = int((view.node_features == 0).all(axis=1).sum())
        assert 29 <= dropped_edges <= 71
        assert 7 <= dropped_nodes <= 33

    def test_same_seed_same_view(self):
        fg = line_graph(8)
        first, second = augment_view(fg, 0.3, 0.3, 5), augment_view(fg, 0.3, 0.3, 5)
        assert first.graph == second.graph
        assert np.array_equal(first.node_features, second.node_features)


class TestStage1:
    def test_contrastive_only_leaves_edge_head_untouched(self, small_corpus):
        config = tiny_config(**{"cge.lambda_edge": 0.0, "cge.lambda_cl": 1.0})
        model = CodeGraphEncoder.from_config(config).train()
        stage1_loss(model, small_corpus, config, 0).total.backward()
        for p in model.edge_head.parameters():
            assert p.grad is None or not p.grad.any()
        assert any(p.grad is not None and p.grad.any() for p in model.layers.parameters())

    def test_smoke_trace(self, small_corpus, config):
        result = train_stage1(small_corpus, config, seed=0)
        epochs = result.trace.epochs
        assert len(epochs) == 2
        for entry in epochs:
            assert all(math.isfinite(entry[key]) for key in ("loss", "contrastive", "edge"))

    def test_seeded_runs_repeat(self, small_corpus, config):
        first = train_stage1(small_corpus, config, seed=4).trace.to_dict()
        second = train_stage1(small_corpus, config, seed=4).trace.to_dict()
        assert first == second

    def test_empty_corpus(self, config):
        with pytest.raises(DegenerateInput):
            train_stage1([], config, seed=0)

    def test_corpus_with_single_node_graph(self, small_corpus, config):
        result = train_stage1(small_corpus + [single_node_graph()], config, seed=0)
        for entry in result.trace.epochs:
            assert all(math.isfinite(entry[key]) for key in ("loss", "contrastive", "edge"))

    def test_edgeless_batch_has_zero_edge_term(self):
        config = tiny_config(**{"cge.node_drop": 0.0, "cge.edge_drop": 0.0})
        model = CodeGraphEncoder.from_config(config).train()
        loss = stage1_loss(model, [single_node_graph(seed=1), single_node_graph(seed=2)], config, 0)
        assert float(loss.edge) == 0.0 and loss.edge_accuracy == 0.0
        assert float(loss.total) == pytest.approx(config["cge.lambda_cl"] * float(loss.contrastive))

    @pytest.mark.slow
    def test_learning_signal_on_synthetic_corpus(self):
        corpus = featured_corpus(200, seed=1, distinct=False)
        config = tiny_config(**{"cge.epochs": 50, "cge.batch_size": 32, "cge.lr": 3e-3})
        trace = train_stage1(corpus, config, seed=0).trace
        losses = trace.series("loss")
        assert min(losses) <= 0.7 * losses[0]
        assert max(trace.series("edge_accuracy")) >= 3 / 31
