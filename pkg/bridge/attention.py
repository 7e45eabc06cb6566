import math

import torch
import torch.nn as nn
import torch.nn.functional as F

from utils.exceptions import ShapeError


class MultiHeadAttention(nn.Module):
    """Scaled dot-product attention with a boolean visibility mask (True = may attend)"""

    def __init__(self, d_model: int, heads: int, kv_dim=None, dropout: float = 0.0):
        super().__init__()
        if d_model % heads:
            raise ShapeError(f"d_model {d_model} is not divisible by {heads} heads")
        kv_dim = kv_dim or d_model
        self.heads = heads
        self.d_head = d_model // heads
        self.query = nn.Linear(d_model, d_model)
        self.key = nn.Linear(kv_dim, d_model)
        self.value = nn.Linear(kv_dim, d_model)
        self.out = nn.Linear(d_model, d_model)
        self.dropout = nn.Dropout(dropout)

    def _split(self, x):
        b, n, _ = x.shape
        return x.view(b, n, self.heads, self.d_head).transpose(1, 2)

    def forward(self, x, memory=None, mask=None):
        memory = x if memory is None else memory
        q = self._split(self.query(x))
        k = self._split(self.key(memory))
        v = self._split(self.value(memory))
        scores = q @ k.transpose(-1, -2) / math.sqrt(self.d_head)
        if mask is not None:
            scores = scores.masked_fill(~mask.unsqueeze(1), -math.inf)
        weights = self.dropout(F.softmax(scores, dim=-1))
        b, _, n, _ = q.shape
        return self.out((weights @ v).transpose(1, 2).reshape(b, n, -1))


class FeedForward(nn.Sequential):
    def __init__(self, d_model: int, hidden: int, dropout: float = 0.0):
        super().__init__(
            nn.Linear(d_model, hidden),
            nn.GELU(),
            nn.Dropout(dropout),
            nn.Linear(hidden, d_model),
        )


def causal_mask(length: int, device=None) -> torch.Tensor:
    return torch.ones(length, length, dtype=torch.bool, device=device).tril()
