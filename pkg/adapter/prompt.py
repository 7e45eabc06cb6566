"""
Composite decoder input: soft prompt rows, then the task instruction and the
code as token embeddings, then (when supervising) BOS + answer + EOS
"""
from dataclasses import dataclass
from typing import Optional

import torch
import torch.nn.functional as F

from bridge.tokenizer import BOS, EOS, encode_bytes
from utils.exceptions import LengthError, ShapeError

SOFT_PROMPT_ID = -1


@dataclass
class ComposedInput:
    embeddings: torch.Tensor
    token_ids: torch.Tensor
    answer_mask: torch.Tensor

    @property
    def length(self) -> int:
        return self.embeddings.shape[0]

    @property
    def answer_length(self) -> int:
        return int(self.answer_mask.sum())


def code_room(soft_prompt: torch.Tensor, instruction: str, decoder, reserved: int = 0) -> int:
    """Context positions left for code after soft prompt, instruction and `reserved` tail positions"""
    return decoder.context - soft_prompt.shape[0] - len(encode_bytes(instruction)) - reserved


def truncate_code(code: str, limit: int) -> str:
    """Longest prefix of `code` within `limit` byte tokens, cut on a character boundary"""
    data = code.encode("utf-8")
    if len(data) <= limit:
        return code
    return data[:max(0, limit)].decode("utf-8", errors="ignore")


def answer_positions(answer: str) -> int:
    return len(encode_bytes(answer)) + 2


def compose_input(soft_prompt: torch.Tensor, instruction: str, code: str, decoder,
                  answer: Optional[str] = None) -> ComposedInput:
    """Raises LengthError when the pieces do not fit; callers truncate code first"""
    if soft_prompt.ndim != 2 or soft_prompt.shape[1] != decoder.d_llm:
        raise ShapeError(f"soft prompt must be N_q x {decoder.d_llm}, got {tuple(soft_prompt.shape)}")
    ids = encode_bytes(instruction) + encode_bytes(code)
    # BOS and EOS around the answer
    answer_ids = [] if answer is None else [BOS] + encode_bytes(answer) + [EOS]
    length = soft_prompt.shape[0] + len(ids) + len(answer_ids)
    if length > decoder.context:
        raise LengthError(f"composed input of {length} positions exceeds the decoder context of {decoder.context}")

    token_ids = torch.tensor([SOFT_PROMPT_ID] * soft_prompt.shape[0] + ids + answer_ids, dtype=torch.long)
    embedded = decoder.embed(ids + answer_ids).to(soft_prompt.dtype)
    answer_mask = torch.zeros(length, dtype=torch.bool)
    if answer_ids:
        # BOS is context, not a target
        answer_mask[length - len(answer_ids) + 1:] = True
    return ComposedInput(
        embeddings=torch.cat([soft_prompt, embedded], dim=0),
        token_ids=token_ids,
        answer_mask=answer_mask,
    )


def stage3_batch_loss(composed, decoder) -> torch.Tensor:
    """Summed answer-token NLL per example, averaged over the batch"""
    if not composed or any(c.answer_length == 0 for c in composed):
        raise ShapeError("every composed input needs a supervised answer")
    width = max(c.length for c in composed)
    embeddings = torch.stack([F.pad(c.embeddings, (0, 0, 0, width - c.length)) for c in composed])
    logits = decoder(embeddings)
    losses = []
    for row, c in enumerate(composed):
        positions = torch.nonzero(c.answer_mask).squeeze(-1)
        log_probs = F.log_softmax(logits[row, positions - 1], dim=-1)
        losses.append(-log_probs.gather(1, c.token_ids[positions].unsqueeze(-1)).sum())
    return torch.stack(losses).mean()


def stage3_loss(composed: ComposedInput, decoder) -> torch.Tensor:
    return stage3_batch_loss([composed], decoder)
