"""
Shared training-loop pieces: optimizer, warmup-then-plateau schedule,
early stopping, minibatching and the finite-loss guard
"""
import math
from dataclasses import dataclass, field

import numpy as np
import torch
from loguru import logger

from utils.exceptions import NonFiniteLoss


def build_optimizer(parameters, lr: float, weight_decay: float) -> torch.optim.AdamW:
    params = [p for p in parameters if p.requires_grad]
    return torch.optim.AdamW(params, lr=lr, weight_decay=weight_decay)


class WarmupPlateauSchedule:
    """
    Linear warmup over the first `warmup_steps` optimizer steps, then
    ReduceLROnPlateau driven by the epoch loss
    """

    def __init__(self, optimizer, base_lr: float, warmup_steps: int,
                 patience: int = 2, factor: float = 0.5, min_lr: float = 0.0):
        self.optimizer = optimizer
        self.base_lr = base_lr
        self.warmup_steps = max(0, int(warmup_steps))
        self.steps = 0
        self.plateau = torch.optim.lr_scheduler.ReduceLROnPlateau(
            optimizer, mode="min", patience=patience, factor=factor, min_lr=min_lr, eps=0.0
        )
        self._set_lr(self._warmup_lr(0) if self.warmup_steps else base_lr)

    def _warmup_lr(self, step: int) -> float:
        return self.base_lr * (step + 1) / self.warmup_steps

    def _set_lr(self, lr: float) -> None:
        for group in self.optimizer.param_groups:
            group["lr"] = lr

    @property
    def in_warmup(self) -> bool:
        return self.steps < self.warmup_steps

    @property
    def lr(self) -> float:
        return float(self.optimizer.param_groups[0]["lr"])

    def step_batch(self) -> None:
        """Call after every optimizer step"""
        self.steps += 1
        if self.in_warmup:
            self._set_lr(self._warmup_lr(self.steps))
        elif self.steps == self.warmup_steps:
            self._set_lr(self.base_lr)

    def step_epoch(self, loss: float) -> None:
        if not self.in_warmup:
            self.plateau.step(loss)


def warmup_steps_for(ratio: float, epochs: int, batches_per_epoch: int) -> int:
    return int(math.ceil(ratio * epochs * batches_per_epoch))


class EarlyStopping:
    def __init__(self, patience: int, min_delta: float = 0.0):
        self.patience = patience
        self.min_delta = min_delta
        self.best = math.inf
        self.best_epoch = -1
        self.bad_epochs = 0

    def update(self, value: float, epoch: int) -> bool:
        """Record an epoch result; True once `patience` epochs passed without improvement"""
        if value < self.best - self.min_delta:
            self.best = value
            self.best_epoch = epoch
            self.bad_epochs = 0
            return False
        self.bad_epochs += 1
        return self.bad_epochs >= self.patience

    @property
    def improved_last(self) -> bool:
        return self.bad_epochs == 0


def check_finite(loss: torch.Tensor, batch_id) -> None:
    if not torch.isfinite(loss.detach()).all():
        raise NonFiniteLoss(batch_id, float(loss.detach().reshape(-1)[0]))


def minibatches(count: int, batch_size: int, rng: np.random.Generator) -> list:
    """Shuffled index batches covering range(count) once"""
    order = rng.permutation(count)
    return [order[i:i + batch_size].tolist() for i in range(0, count, batch_size)]


def snapshot(module: torch.nn.Module) -> dict:
    return {name: tensor.detach().clone() for name, tensor in module.state_dict().items()}


@dataclass
class LossTrace:
    """Per-epoch records of a training run, serialized into the JSON reports"""
    epochs: list = field(default_factory=list)
    stopped_early: bool = False
    best_epoch: int = -1

    def record(self, epoch: int, **values) -> None:
        entry = {"epoch": epoch, **{k: float(v) for k, v in values.items()}}
        self.epochs.append(entry)
        logger.info(
            f"epoch {epoch}: " + " ".join(f"{k}={v:.6g}" for k, v in entry.items() if k != "epoch")
        )

    def series(self, key: str) -> list:
        return [entry[key] for entry in self.epochs if key in entry]

    def to_dict(self) -> dict:
        return {"epochs": self.epochs, "stopped_early": self.stopped_early, "best_epoch": self.best_epoch}
