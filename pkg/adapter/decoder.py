"""
Small causal language model used as the frozen decoder during adaptation
"""
import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F
from loguru import logger

from bridge.attention import FeedForward, MultiHeadAttention, causal_mask
from bridge.tokenizer import BOS, EOS, VOCAB_SIZE, encode_bytes, pad_batch
from utils.checkpoint import state_checksum
from utils.exceptions import LengthError
from utils.training import build_optimizer, check_finite, minibatches


class DecoderBlock(nn.Module):
    def __init__(self, d_model: int, heads: int):
        super().__init__()
        self.norm_attention = nn.LayerNorm(d_model)
        self.attention = MultiHeadAttention(d_model, heads)
        self.norm_ffn = nn.LayerNorm(d_model)
        self.ffn = FeedForward(d_model, 4 * d_model)

    def forward(self, x, mask):
        x = x + self.attention(self.norm_attention(x), mask=mask)
        return x + self.ffn(self.norm_ffn(x))


class FrozenDecoder(nn.Module):
    def __init__(self, d_llm=64, layers=2, heads=4, context=1024):
        super().__init__()
        self.d_llm = d_llm
        self.context = context
        self.token_embedding = nn.Embedding(VOCAB_SIZE, d_llm)
        self.position_embedding = nn.Embedding(context, d_llm)
        self.blocks = nn.ModuleList(DecoderBlock(d_llm, heads) for _ in range(layers))
        self.norm = nn.LayerNorm(d_llm)
        self.lm_head = nn.Linear(d_llm, VOCAB_SIZE)

    @classmethod
    def from_config(cls, config) -> "FrozenDecoder":
        return cls(
            d_llm=config["decoder.d_llm"], layers=config["decoder.layers"],
            heads=config["decoder.heads"], context=config["decoder.context"],
        )

    def embed(self, ids) -> torch.Tensor:
        """Token embeddings without positions, for splicing next to soft-prompt rows"""
        return self.token_embedding(torch.as_tensor(ids, dtype=torch.long))

    def forward(self, embeddings: torch.Tensor) -> torch.Tensor:
        """B x L x d_llm input embeddings -> B x L x V next-token logits"""
        length = embeddings.shape[1]
        if length > self.context:
            raise LengthError(f"{length} positions exceed the decoder context of {self.context}")
        x = embeddings + self.position_embedding(torch.arange(length))
        mask = causal_mask(length).unsqueeze(0)
        for block in self.blocks:
            x = block(x, mask)
        return self.lm_head(self.norm(x))

    def freeze(self) -> str:
        for param in self.parameters():
            param.requires_grad_(False)
        self.eval()
        return self.checksum()

    def checksum(self) -> str:
        return state_checksum(self.state_dict())


def language_model_loss(decoder: FrozenDecoder, sequences) -> torch.Tensor:
    ids, mask = pad_batch(sequences)
    ids, mask = torch.tensor(ids, dtype=torch.long), torch.tensor(mask)
    logits = decoder(decoder.embed(ids[:, :-1]))
    nll = F.cross_entropy(logits.transpose(1, 2), ids[:, 1:], reduction="none")
    weights = mask[:, 1:].to(nll.dtype)
    return (nll * weights).sum() / weights.sum()


def train_decoder_fixture(texts, config, seed: int) -> FrozenDecoder:
    """Briefly fit the byte-level decoder on the corpus texts, then freeze it"""
    torch.manual_seed(seed)
    decoder = FrozenDecoder.from_config(config)
    sequences = [([BOS] + encode_bytes(text) + [EOS])[:decoder.context] for text in texts if text]
    optimizer = build_optimizer(decoder.parameters(), config["decoder.lr"], 0.0)
    rng = np.random.default_rng(seed)
    decoder.train()
    for epoch in range(config["decoder.epochs"]):
        losses = []
        for b, indices in enumerate(minibatches(len(sequences), 8, rng)):
            loss = language_model_loss(decoder, [sequences[i] for i in indices])
            check_finite(loss, f"decoder epoch {epoch} batch {b}")
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            losses.append(loss.item())
        if losses:
            logger.info(f"decoder fixture epoch {epoch}: loss={np.mean(losses):.4f}")
    checksum = decoder.freeze()
    logger.info(f"decoder frozen, checksum {checksum[:12]}")
    return decoder
