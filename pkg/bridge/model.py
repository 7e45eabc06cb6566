"""
Bridge between graph and code text: learnable query tokens share
self-attention with the code token stream, read graph node states through
periodic cross-attention, and are projected into the decoder embedding
space as a soft prompt.
"""
import math
from dataclasses import dataclass
from typing import Optional

import torch
import torch.nn as nn
from loguru import logger

from bridge.attention import FeedForward, MultiHeadAttention, causal_mask
from bridge.tokenizer import PAD, VOCAB_SIZE
from utils.checkpoint import load_state
from utils.exceptions import ShapeError


@dataclass
class BridgeOutput:
    queries: torch.Tensor
    text: torch.Tensor


class BridgeLayer(nn.Module):
    def __init__(self, d_model: int, heads: int, ffn: int, cross: bool, dropout: float = 0.0):
        super().__init__()
        self.norm_self = nn.LayerNorm(d_model)
        self.self_attention = MultiHeadAttention(d_model, heads, dropout=dropout)
        self.has_cross = cross
        if cross:
            self.norm_cross = nn.LayerNorm(d_model)
            self.cross_attention = MultiHeadAttention(d_model, heads, dropout=dropout)
        self.norm_ffn_q = nn.LayerNorm(d_model)
        self.ffn_q = FeedForward(d_model, ffn, dropout)
        self.norm_ffn_c = nn.LayerNorm(d_model)
        self.ffn_c = FeedForward(d_model, ffn, dropout)
        self.dropout = nn.Dropout(dropout)

    def cross_attend(self, queries, memory, memory_mask):
        """Residual cross-attention sublayer of the query stream over graph memory"""
        mask = memory_mask.unsqueeze(1).expand(-1, queries.shape[1], -1)
        return queries + self.dropout(self.cross_attention(self.norm_cross(queries), memory, mask))

    def forward(self, queries, text, mask, memory=None, memory_mask=None):
        n_q = queries.shape[1]
        x = torch.cat([queries, text], dim=1)
        x = x + self.dropout(self.self_attention(self.norm_self(x), mask=mask))
        queries, text = x[:, :n_q], x[:, n_q:]
        if self.has_cross and memory is not None and n_q:
            queries = self.cross_attend(queries, memory, memory_mask)
        queries = queries + self.dropout(self.ffn_q(self.norm_ffn_q(queries)))
        text = text + self.dropout(self.ffn_c(self.norm_ffn_c(text)))
        return queries, text


class Bridge(nn.Module):
    def __init__(self, graph_dim=768, d_model=768, queries=32, layers=12, heads=12, ffn=3072,
                 cross_freq=2, max_len=512, dropout=0.1, temp_init=0.07, d_llm=64):
        super().__init__()
        self.d_model = d_model
        self.max_len = max_len
        self.query_tokens = nn.Parameter(torch.zeros(queries, d_model))
        self.token_embedding = nn.Embedding(VOCAB_SIZE, d_model)
        self.position_embedding = nn.Embedding(max_len, d_model)
        self.graph_proj = nn.Linear(graph_dim, d_model)
        self.layers = nn.ModuleList(
            BridgeLayer(d_model, heads, ffn, cross=(i % cross_freq == 0), dropout=dropout)
            for i in range(layers)
        )
        self.norm = nn.LayerNorm(d_model)
        self.dropout = nn.Dropout(dropout)
        self.log_tau = nn.Parameter(torch.tensor(math.log(temp_init)))
        self.gtm_head = nn.Linear(2 * d_model, 1)
        self.lm_head = nn.Linear(d_model, VOCAB_SIZE)
        self.project = nn.Linear(d_model, d_llm, bias=False)
        self._init_weights(layers)

    @classmethod
    def from_config(cls, config) -> "Bridge":
        return cls(
            graph_dim=config["cge.out_dim"], d_model=config["bridge.d_model"],
            queries=config["bridge.queries"], layers=config["bridge.layers"],
            heads=config["bridge.heads"], ffn=config["bridge.ffn"],
            cross_freq=config["bridge.cross_freq"], max_len=config["bridge.max_len"],
            dropout=config["bridge.dropout"], temp_init=config["bridge.temp_init"],
            d_llm=config["decoder.d_llm"],
        )

    def _init_weights(self, layers: int) -> None:
        # scaled normal; residual output projections shrink with depth
        for name, param in self.named_parameters():
            if name == "log_tau" or "norm" in name:
                continue
            if name.endswith("bias"):
                nn.init.zeros_(param)
            elif name.endswith("out.weight") or name.endswith(".3.weight"):
                nn.init.normal_(param, std=0.02 / math.sqrt(2 * max(1, layers)))
            else:
                nn.init.normal_(param, std=0.02)

    @property
    def num_queries(self) -> int:
        return self.query_tokens.shape[0]

    @property
    def tau(self) -> torch.Tensor:
        return self.log_tau.exp()

    def embed_tokens(self, ids):
        if ids.shape[1] > self.max_len:
            raise ShapeError(f"{ids.shape[1]} tokens exceed the bridge max length {self.max_len}")
        positions = torch.arange(ids.shape[1], device=ids.device)
        return self.dropout(self.token_embedding(ids) + self.position_embedding(positions))

    def graph_memory(self, encoding, num_graphs: int):
        """Padded per-graph key/value rows: projected node states plus the pooled vector"""
        counts = torch.bincount(encoding.graph_index, minlength=num_graphs).tolist()
        width = max(counts) + 1
        dtype = encoding.node_states.dtype
        memory = torch.zeros(num_graphs, width, encoding.node_states.shape[1], dtype=dtype)
        mask = torch.zeros(num_graphs, width, dtype=torch.bool)
        for g in range(num_graphs):
            states = encoding.states_of(g)
            memory[g, :counts[g]] = states
            memory[g, counts[g]] = encoding.pooled[g]
            mask[g, :counts[g] + 1] = True
        return self.graph_proj(memory), mask

    def _visibility(self, n_q: int, token_mask, batch: int, causal: bool):
        key_valid = torch.cat([torch.ones(batch, n_q, dtype=torch.bool), token_mask], dim=1)
        length = key_valid.shape[1]
        allowed = key_valid.unsqueeze(1).expand(batch, length, length).clone()
        if causal:
            allowed[:, :n_q, n_q:] = False
            allowed[:, n_q:, n_q:] &= causal_mask(length - n_q)
        return allowed

    def _run(self, batch: int, with_queries: bool, ids=None, token_mask=None,
             memory=None, memory_mask=None, causal=False):
        dtype = self.query_tokens.dtype
        if with_queries:
            queries = self.query_tokens.unsqueeze(0).expand(batch, -1, -1)
        else:
            queries = torch.zeros(batch, 0, self.d_model, dtype=dtype)
        if ids is None:
            text = torch.zeros(batch, 0, self.d_model, dtype=dtype)
            token_mask = torch.zeros(batch, 0, dtype=torch.bool)
        else:
            text = self.embed_tokens(ids)
            if token_mask is None:
                token_mask = ids != PAD
        mask = self._visibility(queries.shape[1], token_mask, batch, causal)
        for layer in self.layers:
            queries, text = layer(queries, text, mask, memory, memory_mask)
        return BridgeOutput(queries=self.norm(queries), text=self.norm(text))

    def query_forward(self, memory, memory_mask) -> torch.Tensor:
        """Query tokens over the graph alone (no text stream); B x N_q x d_model"""
        return self._run(memory.shape[0], True, memory=memory, memory_mask=memory_mask).queries

    def joint_forward(self, memory, memory_mask, ids, token_mask=None) -> BridgeOutput:
        """Queries and code tokens under full bidirectional visibility"""
        return self._run(ids.shape[0], True, ids, token_mask, memory, memory_mask)

    def text_forward(self, ids, token_mask=None) -> torch.Tensor:
        """Unimodal text pass; returns the final CLS state per sequence"""
        return self._run(ids.shape[0], False, ids, token_mask).text[:, 0]

    def generation_logits(self, memory, memory_mask, input_ids, token_mask=None) -> torch.Tensor:
        """Next-token logits of the text stream under a causal mask, reading the queries"""
        output = self._run(input_ids.shape[0], True, input_ids, token_mask, memory, memory_mask, causal=True)
        return self.lm_head(output.text)

    def match_logits(self, memory, memory_mask, ids, token_mask, h_cls) -> torch.Tensor:
        """Graph/text matching logit: mean-pooled joint queries next to the unimodal CLS state"""
        queries = self.joint_forward(memory, memory_mask, ids, token_mask).queries
        return self.gtm_head(torch.cat([queries.mean(dim=1), h_cls], dim=-1)).squeeze(-1)


def _single_memory(bridge: Bridge, graph_states: torch.Tensor):
    rows = torch.cat([graph_states, graph_states.mean(dim=0, keepdim=True)], dim=0)
    memory = bridge.graph_proj(rows).unsqueeze(0)
    return memory, torch.ones(1, rows.shape[0], dtype=torch.bool)


def _ids(code_tokens) -> torch.Tensor:
    return torch.as_tensor(code_tokens, dtype=torch.long).reshape(1, -1)


def bridge_forward(bridge: Bridge, graph_states: torch.Tensor, code_tokens, train: bool = False) -> BridgeOutput:
    """One graph (N x d_out node states) and one token sequence through the joint pass"""
    if graph_states.ndim != 2:
        raise ShapeError(f"graph states must be N x d, got {tuple(graph_states.shape)}")
    bridge.train(train)
    memory, memory_mask = _single_memory(bridge, graph_states)
    output = bridge.joint_forward(memory, memory_mask, _ids(code_tokens))
    return BridgeOutput(queries=output.queries[0], text=output.text[0])


def text_only_forward(bridge: Bridge, code_tokens) -> torch.Tensor:
    bridge.eval()
    return bridge.text_forward(_ids(code_tokens))[0]


def project_soft_prompt(queries: torch.Tensor, bridge: Bridge) -> torch.Tensor:
    """P_G = Proj_LLM(B_Q)"""
    if queries.shape[-1] != bridge.d_model:
        raise ShapeError(f"query states have width {queries.shape[-1]}, projection expects {bridge.d_model}")
    return bridge.project(queries)


def load_initial_weights(bridge: Bridge, path) -> int:
    """Copy every tensor of an external checkpoint whose name and shape match; returns the count"""
    own = bridge.state_dict()
    loaded = {
        name: tensor for name, tensor in load_state(path).items()
        if name in own and own[name].shape == tensor.shape
    }
    bridge.load_state_dict(loaded, strict=False)
    logger.info(f"initialized {len(loaded)}/{len(own)} bridge tensors from {path}")
    return len(loaded)
