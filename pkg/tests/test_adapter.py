import math

import pytest
import torch
import torch.nn.functional as F

from adapter.decoder import FrozenDecoder, language_model_loss, train_decoder_fixture
from adapter.generation import apply_repetition_penalty, generate, generate_ids
from adapter.prompt import SOFT_PROMPT_ID, code_room, compose_input, stage3_batch_loss, stage3_loss, truncate_code
from adapter.training import TaskExample, evaluate_nll, soft_prompts, stage3_examples_loss, train_stage3
from bridge.model import Bridge
from bridge.tokenizer import BOS, EOS, VOCAB_SIZE, encode_bytes
from cge.model import CodeGraphEncoder
from data.features import encode_features
from extract.pipeline import extract_graph
from extract.types import SourceUnit
from config.settings import TASK_INSTRUCTIONS
from tests.conftest import tiny_config
from utils.exceptions import LengthError, ShapeError
from utils.training import snapshot


@pytest.fixture
def decoder(config):
    return FrozenDecoder.from_config(config)


def biased_decoder(config, bias: dict) -> FrozenDecoder:
    """Decoder whose logits equal a fixed bias vector at every position"""
    decoder = FrozenDecoder.from_config(config)
    with torch.no_grad():
        decoder.lm_head.weight.zero_()
        decoder.lm_head.bias.zero_()
        for token, value in bias.items():
            decoder.lm_head.bias[token] = value
    decoder.freeze()
    return decoder


class TestCompose:
    def test_length_counts_every_segment(self, decoder):
        composed = compose_input(torch.randn(32, 16), "abcde", "0123456789", decoder)
        assert composed.length == 47
        assert composed.answer_length == 0
        assert composed.token_ids[:32].eq(SOFT_PROMPT_ID).all()

    def test_empty_instruction(self, decoder):
        composed = compose_input(torch.randn(4, 16), "", "x = 1", decoder)
        assert composed.length == 9

    def test_answer_positions(self, decoder):
        composed = compose_input(torch.randn(4, 16), "sum", "x", decoder, answer="Adds.")
        assert composed.length == 4 + 4 + 7
        assert composed.answer_length == 6
        assert composed.token_ids[-7] == BOS and composed.token_ids[-1] == EOS
        assert not composed.answer_mask[-7] and composed.answer_mask[-6:].all()

    def test_soft_prompt_rows_kept(self, decoder):
        prompt = torch.randn(3, 16)
        assert torch.equal(compose_input(prompt, "i", "c", decoder).embeddings[:3], prompt)

    def test_truncate_code_keeps_characters_whole(self):
        assert truncate_code("x = 1", 10) == "x = 1"
        assert truncate_code("abé", 3) == "ab"
        assert truncate_code("abc", -2) == ""

    def test_code_room(self):
        decoder = FrozenDecoder(d_llm=16, layers=1, heads=2, context=20)
        assert code_room(torch.randn(4, 16), "do", decoder, reserved=3) == 20 - 4 - 2 - 3

    def test_context_overflow(self):
        decoder = FrozenDecoder(d_llm=16, layers=1, heads=2, context=20)
        with pytest.raises(LengthError):
            compose_input(torch.randn(4, 16), "instruction", "some code here", decoder)

    def test_prompt_width_checked(self, decoder):
        with pytest.raises(ShapeError):
            compose_input(torch.randn(4, 8), "i", "c", decoder)


class TestStage3Loss:
    def test_uniform_decoder(self, config):
        decoder = biased_decoder(config, {})
        composed = compose_input(torch.randn(4, 16), "do", "x = 1", decoder, answer="ok")
        assert float(stage3_loss(composed, decoder)) == pytest.approx(3 * math.log(VOCAB_SIZE), rel=1e-5)

    def test_matches_position_by_position_oracle(self, decoder):
        decoder.freeze()
        composed = compose_input(torch.randn(4, 16), "do", "x = 1", decoder, answer="fine")
        logits = decoder(composed.embeddings.unsqueeze(0))[0]
        expected = 0.0
        for position in range(composed.length):
            if composed.answer_mask[position]:
                log_probs = F.log_softmax(logits[position - 1], dim=-1)
                expected -= float(log_probs[composed.token_ids[position]])
        assert float(stage3_loss(composed, decoder)) == pytest.approx(expected, rel=1e-5)

    def test_batch_mean_of_examples(self, decoder):
        decoder.freeze()
        short = compose_input(torch.randn(4, 16), "do", "x", decoder, answer="a")
        long = compose_input(torch.randn(4, 16), "do", "y = x + 1", decoder, answer="longer")
        expected = 0.5 * (float(stage3_loss(short, decoder)) + float(stage3_loss(long, decoder)))
        assert float(stage3_batch_loss([short, long], decoder)) == pytest.approx(expected, rel=1e-5)

    def test_gradient_reaches_prompt_only(self, decoder):
        decoder.freeze()
        prompt = torch.randn(4, 16, requires_grad=True)
        stage3_loss(compose_input(prompt, "do", "x", decoder, answer="y"), decoder).backward()
        assert prompt.grad is not None and prompt.grad.any()
        assert all(p.grad is None for p in decoder.parameters())

    def test_unsupervised_input_rejected(self, decoder):
        with pytest.raises(ShapeError):
            stage3_loss(compose_input(torch.randn(2, 16), "do", "x", decoder), decoder)


class TestDecoder:
    def test_fixture_is_frozen(self, config):
        decoder = train_decoder_fixture(["def f():\n    return 1\n", "Return one."], config, seed=0)
        assert not any(p.requires_grad for p in decoder.parameters())
        assert not decoder.training

    def test_checksum_tracks_weights(self, decoder):
        before = decoder.checksum()
        assert decoder.freeze() == before
        with torch.no_grad():
            decoder.lm_head.bias[0] += 1.0
        assert decoder.checksum() != before

    def test_language_model_loss_finite(self, decoder):
        sequences = [[BOS] + encode_bytes("abc") + [EOS], [BOS] + encode_bytes("a") + [EOS]]
        assert math.isfinite(float(language_model_loss(decoder, sequences)))

    def test_context_enforced(self, decoder):
        with pytest.raises(LengthError):
            decoder(torch.zeros(1, 513, 16))


class TestStage3Training:
    @pytest.fixture
    def parts(self, config, small_corpus):
        encoder = CodeGraphEncoder.from_config(config)
        bridge = Bridge.from_config(config)
        decoder = FrozenDecoder.from_config(config)
        examples = [TaskExample(graph=fg, answer=f"Summary {i}.") for i, fg in enumerate(small_corpus)]
        return encoder, bridge, decoder, examples

    def test_soft_prompt_shape(self, parts, small_corpus):
        encoder, bridge, _, _ = parts
        assert soft_prompts(bridge, encoder, small_corpus[:3]).shape == (3, 4, 16)

    def test_zero_learning_rate_changes_nothing(self, parts):
        encoder, bridge, decoder, examples = parts
        before = snapshot(bridge)
        checksum = decoder.checksum()
        config = tiny_config(**{"stage3.lr": 0.0})
        result = train_stage3(examples, config, 0, bridge, encoder, decoder)
        after = result.bridge.state_dict()
        assert all(torch.equal(before[name], after[name]) for name in before)
        assert result.decoder_checksum == checksum == decoder.checksum()

    def test_smoke_trace(self, parts, config):
        encoder, bridge, decoder, examples = parts
        result = train_stage3(examples, config, 0, bridge, encoder, decoder)
        assert math.isfinite(result.trace.epochs[0]["nll"])
        nll = evaluate_nll(result.bridge, encoder, decoder, examples[:2], TASK_INSTRUCTIONS["summarization"])
        assert math.isfinite(nll) and nll > 0

    def test_long_code_is_cut_to_the_context(self, parts):
        encoder, bridge, _, _ = parts
        body = "".join(f"    v{i} = v{i - 1} + {i}\n" for i in range(1, 30))
        graph = encode_features(extract_graph(SourceUnit(id="long.py", language="python",
                                                         code=f"def f(v0):\n{body}    return v29\n")), 16)
        instruction = TASK_INSTRUCTIONS["summarization"]
        answer = "Adds numbers."
        context = 4 + len(encode_bytes(instruction)) + len(encode_bytes(answer)) + 2 + 10
        decoder = FrozenDecoder(d_llm=16, layers=1, heads=2, context=context)
        assert len(encode_bytes(graph.graph.code)) > context
        loss = stage3_examples_loss(bridge, encoder, decoder, [TaskExample(graph, answer)], instruction)
        assert math.isfinite(float(loss))

    @pytest.mark.slow
    def test_nll_falls_with_training(self, small_corpus):
        config = tiny_config(**{"stage3.epochs": 20, "stage3.lr": 1e-2, "decoder.epochs": 5})
        examples = [TaskExample(graph=fg, answer=f"Summary {i}.") for i, fg in enumerate(small_corpus)]
        decoder = train_decoder_fixture([ex.answer for ex in examples], config, seed=0)
        encoder = CodeGraphEncoder.from_config(config)
        result = train_stage3(examples, config, 0, Bridge.from_config(config), encoder, decoder)
        nll = result.trace.series("nll")
        assert min(nll) < nll[0]


class TestGeneration:
    def test_penalty_rule(self):
        logits = torch.tensor([2.0, -1.0, 0.5, 3.0])
        penalized = apply_repetition_penalty(logits, [0, 1, 1], 2.0)
        assert penalized.tolist() == [1.0, -2.0, 0.5, 3.0]
        assert logits.tolist() == [2.0, -1.0, 0.5, 3.0]

    def test_no_penalty_is_passthrough(self):
        logits = torch.tensor([1.0, 2.0])
        assert apply_repetition_penalty(logits, [0], 1.0) is logits

    def test_zero_budget(self, decoder):
        assert generate(torch.randn(4, 16), "do", "x", decoder, max_new_tokens=0) == ""

    def test_stops_at_eos(self, config):
        decoder = biased_decoder(config, {EOS: 5.0})
        assert generate_ids(torch.randn(4, 16), "do", "x", decoder, 10) == []

    def test_penalty_changes_greedy_choice(self, config):
        a, b = encode_bytes("ab")
        decoder = biased_decoder(config, {a: 1.0, b: 0.9})
        prompt = torch.randn(4, 16)
        assert generate(prompt, "do", "x", decoder, 4, repetition_penalty=1.0) == "aaaa"
        assert generate(prompt, "do", "x", decoder, 4, repetition_penalty=2.0) == "abaa"

    def test_budget_and_context_bound_output(self, config):
        a = encode_bytes("a")[0]
        decoder = biased_decoder(config, {a: 1.0})
        assert len(generate_ids(torch.randn(4, 16), "do", "x", decoder, 3, 1.0)) == 3
        small = FrozenDecoder(d_llm=16, layers=1, heads=2, context=12)
        with torch.no_grad():
            small.lm_head.weight.zero_()
            small.lm_head.bias.zero_()
            small.lm_head.bias[a] = 1.0
        assert len(generate_ids(torch.randn(4, 16), "do", "x", small, 50, 1.0)) == 12 - (4 + 3 + 1)

    def test_deterministic(self, decoder):
        prompt = torch.randn(4, 16)
        first = generate(prompt, "do", "x = 1", decoder, 8)
        assert generate(prompt, "do", "x = 1", decoder, 8) == first

    def test_long_code_leaves_room_for_new_tokens(self):
        a = encode_bytes("a")[0]
        small = FrozenDecoder(d_llm=16, layers=1, heads=2, context=32)
        with torch.no_grad():
            small.lm_head.weight.zero_()
            small.lm_head.bias.zero_()
            small.lm_head.bias[a] = 1.0
        assert len(generate_ids(torch.randn(4, 16), "do", "x = 1\n" * 40, small, 5, 1.0)) == 5
