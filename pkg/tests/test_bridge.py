import math

import numpy as np
import pytest
import torch

from bridge.losses import (
    gtc_loss, gtg_loss, gtm_loss, match_probability_loss, mine_hard_negatives, query_text_similarity,
)
from bridge.model import Bridge, bridge_forward, project_soft_prompt, text_only_forward
from bridge.tokenizer import BOS, CLS, EOS, PAD, VOCAB_SIZE, detokenize, generation_tokens, pad_batch, tokenize_code
from bridge.training import evaluate_alignment, matching_pairs, prepare_batch, stage2_loss, train_stage2
from cge.model import CodeGraphEncoder
from tests.conftest import featured_corpus, tiny_config
from utils.exceptions import DegenerateInput, ShapeError
from utils.training import snapshot


@pytest.fixture
def bridge(config):
    return Bridge.from_config(config).eval()


@pytest.fixture
def encoder(config):
    return CodeGraphEncoder.from_config(config)


class TestTokenizer:
    def test_empty_code_is_cls_only(self):
        assert tokenize_code("") == [CLS]

    def test_bytes_are_offset(self):
        assert tokenize_code("ab") == [0, 101, 102]

    def test_round_trip_text(self):
        code = "def f(x):\n    return x + 1  # ünïcode\n"
        assert detokenize(tokenize_code(code)) == code

    def test_truncation_counts_cls(self):
        assert len(tokenize_code("abcdef", max_len=3)) == 3

    def test_generation_pair_is_shifted(self):
        source, target = generation_tokens("ab")
        assert source == [BOS, 101, 102]
        assert target == [101, 102, EOS]

    def test_pad_batch(self):
        ids, mask = pad_batch([[5, 6, 7], [8]])
        assert ids == [[5, 6, 7], [8, PAD, PAD]]
        assert mask == [[True] * 3, [True, False, False]]


class TestBridgeForward:
    def test_query_rows_and_text_length(self, bridge):
        states = torch.randn(5, 16)
        output = bridge_forward(bridge, states, tokenize_code("x = 1"))
        assert output.queries.shape == (4, 16)
        assert output.text.shape == (6, 16)

    def test_graph_states_reach_queries(self, bridge):
        tokens = tokenize_code("y = 2")
        first = bridge_forward(bridge, torch.randn(4, 16), tokens).queries
        second = bridge_forward(bridge, torch.randn(4, 16), tokens).queries
        assert not torch.allclose(first, second)

    def test_zero_value_cross_attention_is_identity(self, bridge):
        layer = bridge.layers[0]
        assert layer.has_cross
        with torch.no_grad():
            layer.cross_attention.value.weight.zero_()
            layer.cross_attention.value.bias.zero_()
            layer.cross_attention.out.bias.zero_()
        queries = torch.randn(2, 4, 16)
        memory = torch.randn(2, 6, 16)
        mask = torch.ones(2, 6, dtype=torch.bool)
        assert torch.equal(layer.cross_attend(queries, memory, mask), queries)

    def test_text_pass_ignores_graph(self, bridge):
        tokens = tokenize_code("return a")
        assert text_only_forward(bridge, tokens).shape == (16,)

    def test_generation_is_causal(self, bridge):
        states = torch.randn(1, 3, 16)
        memory = bridge.graph_proj(states)
        memory_mask = torch.ones(1, 3, dtype=torch.bool)
        ids = torch.tensor([generation_tokens("a = b + c")[0]])
        changed = ids.clone()
        changed[0, 5] = 4 + ord("z")
        with torch.no_grad():
            before = bridge.generation_logits(memory, memory_mask, ids)
            after = bridge.generation_logits(memory, memory_mask, changed)
        assert torch.allclose(before[:, :5], after[:, :5], atol=1e-6)
        assert not torch.allclose(before[:, 5:], after[:, 5:])

    def test_overlong_tokens_rejected(self, bridge):
        with pytest.raises(ShapeError):
            bridge.text_forward(torch.zeros(1, 129, dtype=torch.long))

    def test_graph_memory_appends_pooled_row(self, bridge, encoder, small_corpus):
        batch = prepare_batch(small_corpus[:2], encoder, bridge)
        counts = [fg.num_nodes for fg in small_corpus[:2]]
        assert batch.memory.shape[1] == max(counts) + 1
        assert batch.memory_mask.sum(dim=1).tolist() == [c + 1 for c in counts]


class TestProjection:
    def test_identity_projection(self, bridge):
        with torch.no_grad():
            bridge.project.weight.copy_(torch.eye(16))
        queries = torch.randn(4, 16)
        assert torch.equal(project_soft_prompt(queries, bridge), queries)

    def test_shape_and_linearity(self):
        bridge = Bridge.from_config(tiny_config(**{"decoder.d_llm": 8, "decoder.heads": 2}))
        x, y = torch.randn(4, 16), torch.randn(4, 16)
        projected = project_soft_prompt(2.0 * x - 3.0 * y, bridge)
        assert projected.shape == (4, 8)
        expected = 2.0 * project_soft_prompt(x, bridge) - 3.0 * project_soft_prompt(y, bridge)
        assert torch.allclose(projected, expected, atol=1e-6)

    def test_width_checked(self, bridge):
        with pytest.raises(ShapeError):
            project_soft_prompt(torch.randn(4, 8), bridge)


class TestContrastive:
    def test_single_pair_is_zero(self):
        loss = gtc_loss(torch.randn(1, 3, 8), torch.randn(1, 8), 0.07)
        assert float(loss) == pytest.approx(0.0, abs=1e-7)

    def test_orthonormal_closed_form(self):
        eye = torch.eye(2, dtype=torch.float64)
        loss = gtc_loss(eye.unsqueeze(1), eye, 1.0)
        assert float(loss) == pytest.approx(math.log(1 + math.exp(-1)), abs=1e-6)

    def test_duplicate_pairs_give_log_two(self):
        row = torch.tensor([[0.6, 0.8]], dtype=torch.float64)
        queries = row.expand(2, 1, 2)
        assert float(gtc_loss(queries, row.expand(2, 2), 0.5)) == pytest.approx(math.log(2), abs=1e-9)

    def test_joint_permutation_keeps_loss(self):
        queries, texts = torch.randn(5, 3, 8, dtype=torch.float64), torch.randn(5, 8, dtype=torch.float64)
        order = torch.tensor([2, 4, 0, 1, 3])
        assert float(gtc_loss(queries, texts, 0.1)) == pytest.approx(
            float(gtc_loss(queries[order], texts[order], 0.1)), abs=1e-9
        )

    def test_similarity_takes_best_query(self):
        queries = torch.tensor([[[1.0, 0.0], [-1.0, 0.0]]])
        assert float(query_text_similarity(queries, torch.tensor([[1.0, 0.0]]))) == pytest.approx(1.0)

    def test_zero_text_rejected(self):
        with pytest.raises(DegenerateInput):
            gtc_loss(torch.randn(2, 3, 4), torch.zeros(2, 4), 0.07)


class TestMatching:
    def test_even_odds_cost_log_two(self):
        labels = torch.tensor([1.0, 0.0, 0.0, 1.0])
        assert float(gtm_loss(torch.zeros(4), labels)) == pytest.approx(math.log(2), abs=1e-7)
        assert float(match_probability_loss(torch.full((4,), 0.5), labels)) == pytest.approx(math.log(2), abs=1e-7)

    def test_mined_negatives_come_from_top_k(self):
        rng = np.random.default_rng(7)
        sim = rng.standard_normal((6, 6))
        neg_text, neg_graph = mine_hard_negatives(sim, 2, seed=1)
        for anchor in range(6):
            others = [j for j in range(6) if j != anchor]
            top_text = sorted(others, key=lambda j: -sim[anchor, j])[:2]
            top_graph = sorted(others, key=lambda j: -sim[j, anchor])[:2]
            assert neg_text[anchor] in top_text
            assert neg_graph[anchor] in top_graph

    def test_mining_needs_two_pairs(self):
        with pytest.raises(DegenerateInput):
            mine_hard_negatives(np.zeros((1, 1)), 3, 0)

    def test_pair_layout(self):
        sim = torch.randn(4, 4)
        graphs, texts, labels = matching_pairs(4, sim, 3, seed=0)
        assert len(graphs) == len(texts) == len(labels) == 12
        assert labels.count(1.0) == 4
        assert all(g != t for g, t, label in zip(graphs, texts, labels) if label == 0.0)
        assert all(g == t for g, t, label in zip(graphs, texts, labels) if label == 1.0)

    def test_single_pair_has_no_negatives(self):
        assert matching_pairs(1, torch.ones(1, 1), 3, 0) == ([0], [0], [1.0])


class TestGeneration:
    def test_uniform_logits(self):
        logits = torch.zeros(2, 7, VOCAB_SIZE, dtype=torch.float64)
        targets = torch.randint(0, VOCAB_SIZE, (2, 7))
        loss = gtg_loss(logits, targets, torch.ones(2, 7, dtype=torch.bool))
        assert float(loss) == pytest.approx(7 * math.log(VOCAB_SIZE), abs=1e-9)

    def test_padding_is_ignored(self):
        logits = torch.zeros(2, 5, VOCAB_SIZE, dtype=torch.float64)
        mask = torch.tensor([[True] * 3 + [False] * 2, [True] * 5])
        loss = gtg_loss(logits, torch.zeros(2, 5, dtype=torch.long), mask)
        assert float(loss) == pytest.approx(4 * math.log(VOCAB_SIZE), abs=1e-9)

    def test_misaligned_targets(self):
        with pytest.raises(ShapeError):
            gtg_loss(torch.zeros(1, 4, VOCAB_SIZE), torch.zeros(1, 5, dtype=torch.long), torch.ones(1, 5))


class TestStage2:
    def test_disabled_matching_leaves_head_untouched(self, small_corpus, encoder):
        config = tiny_config(**{"bridge.use_gtm": False})
        bridge = Bridge.from_config(config).train()
        batch = prepare_batch(small_corpus[:4], encoder, bridge)
        loss = stage2_loss(bridge, batch, config, seed=0)
        loss.total.backward()
        assert torch.isfinite(loss.gtm)
        for p in bridge.gtm_head.parameters():
            assert p.grad is None or not p.grad.any()
        assert bridge.query_tokens.grad is not None and bridge.query_tokens.grad.any()

    def test_smoke_keeps_encoder_frozen(self, small_corpus, config, encoder):
        before = snapshot(encoder)
        result = train_stage2(small_corpus, config, seed=0, encoder=encoder)
        entry = result.trace.epochs[0]
        assert all(math.isfinite(entry[key]) for key in ("loss", "gtc", "gtm", "gtg"))
        after = result.encoder.state_dict()
        assert all(torch.equal(before[name], after[name]) for name in before)

    def test_evaluation_report(self, small_corpus, config, encoder):
        bridge = Bridge.from_config(config)
        report = evaluate_alignment(bridge, encoder, small_corpus)
        assert report["pairs"] == len(small_corpus)
        assert 0.0 <= report["recall_at_1"] <= 1.0
        assert 0.0 <= report["gtm_accuracy"] <= 1.0

    def test_empty_corpus(self, config):
        with pytest.raises(DegenerateInput):
            train_stage2([], config, seed=0)

    @pytest.mark.slow
    def test_contrastive_loss_falls_on_toy_corpus(self):
        corpus = featured_corpus(32, seed=2)
        config = tiny_config(**{"bridge.epochs": 30, "bridge.patience": 30})
        trace = train_stage2(corpus, config, seed=0).trace
        gtc = trace.series("gtc")
        assert gtc[-1] < gtc[0]
