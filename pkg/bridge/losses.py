import numpy as np
import torch
import torch.nn.functional as F

from cge.losses import info_nce
from utils.exceptions import DegenerateInput, ShapeError


def _unit(x: torch.Tensor, what: str) -> torch.Tensor:
    norms = x.norm(dim=-1, keepdim=True)
    if bool((norms == 0).any()):
        raise DegenerateInput(f"{what} has a zero-norm row")
    return x / norms


def query_text_similarity(queries: torch.Tensor, h_cls: torch.Tensor) -> torch.Tensor:
    """s[i, j] = max over the query rows of graph i of cosine(row, h_cls[j])"""
    if queries.ndim != 3 or h_cls.ndim != 2 or queries.shape[-1] != h_cls.shape[-1]:
        raise ShapeError(f"expected M x N_q x d queries and M x d texts, got {tuple(queries.shape)} and {tuple(h_cls.shape)}")
    q = _unit(queries, "query states")
    t = _unit(h_cls, "text states")
    return torch.einsum("ind,jd->ijn", q, t).amax(dim=-1)


def gtc_loss(queries: torch.Tensor, h_cls: torch.Tensor, tau) -> torch.Tensor:
    """Symmetric graph-text contrastive loss over max-cosine similarities"""
    if queries.shape[0] != h_cls.shape[0] or queries.shape[0] < 1:
        raise ShapeError("graph and text batches must have the same non-zero size")
    return info_nce(query_text_similarity(queries, h_cls) / tau)


def mine_hard_negatives(similarity, k: int, seed: int):
    """
    For each graph anchor pick one non-matching text, and for each text anchor
    one non-matching graph, sampled by softmax of similarity among the top-k
    most similar non-matches. Returns (text index per graph, graph index per text).
    """
    sim = np.asarray(similarity.detach().cpu().to(torch.float64) if torch.is_tensor(similarity) else similarity)
    m = sim.shape[0]
    if m < 2:
        raise DegenerateInput("hard negative mining needs at least 2 pairs")
    rng = np.random.default_rng(seed)
    k = max(1, min(k, m - 1))

    def pick(rows):
        chosen = []
        for anchor in range(m):
            candidates = np.array([j for j in range(m) if j != anchor])
            scores = rows[anchor, candidates]
            top = candidates[np.argsort(-scores, kind="stable")[:k]]
            weights = np.exp(rows[anchor, top] - rows[anchor, top].max())
            chosen.append(int(rng.choice(top, p=weights / weights.sum())))
        return chosen

    return pick(sim), pick(sim.T)


def gtm_loss(logits: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    """Mean binary cross-entropy of match logits (sigmoid gives p)"""
    return F.binary_cross_entropy_with_logits(logits, labels.to(logits.dtype))


def match_probability_loss(probabilities: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    return F.binary_cross_entropy(probabilities, labels.to(probabilities.dtype))


def gtg_loss(logits: torch.Tensor, targets: torch.Tensor, target_mask: torch.Tensor) -> torch.Tensor:
    """Per-sequence summed next-token NLL over real target positions, averaged over the batch"""
    if logits.shape[:2] != targets.shape:
        raise ShapeError(f"logits {tuple(logits.shape)} do not line up with targets {tuple(targets.shape)}")
    nll = F.cross_entropy(logits.transpose(1, 2), targets, reduction="none")
    return (nll * target_mask.to(nll.dtype)).sum(dim=1).mean()
