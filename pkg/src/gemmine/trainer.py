"""Weight training of masked subnetworks, evaluation, and run reports."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .autodiff import Tensor, backward, mul, softmax_cross_entropy
from .data import DatasetSplit
from .masking import STREAM_BATCHES, mlp_forward, mlp_logits, mask_sparsity, stream_rng
from .optim import OptimizerChoice, SgdMomentum, make_optimizer


@dataclass(frozen=True)
class MultiStep:
    milestones: tuple[int, ...]
    gamma: float = 0.1


@dataclass(frozen=True)
class Cosine:
    pass


ScheduleChoice = Union[MultiStep, Cosine]


@dataclass(frozen=True)
class TrainConfig:
    epochs: int
    batch_size: int = 32
    optimizer: OptimizerChoice = SgdMomentum()
    lr: float = 0.1
    schedule: ScheduleChoice = Cosine()
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1 or self.lr <= 0:
            raise ValueError(f"invalid TrainConfig: epochs={self.epochs}, batch_size={self.batch_size}, lr={self.lr}")
        if isinstance(self.schedule, MultiStep):
            ms = self.schedule.milestones
            if any(b <= a for a, b in zip(ms, ms[1:])) or any(m >= self.epochs for m in ms):
                raise ValueError(f"milestones must be strictly increasing and < epochs, got {ms}")


def lr_at(cfg: TrainConfig, epoch: int) -> float:
    """Learning rate for a 0-indexed epoch."""
    if epoch < 0 or epoch >= max(cfg.epochs, 1):
        raise ValueError(f"epoch {epoch} outside [0, {cfg.epochs})")
    if isinstance(cfg.schedule, MultiStep):
        passed = sum(1 for m in cfg.schedule.milestones if epoch >= m)
        return cfg.lr * cfg.schedule.gamma**passed
    return cfg.lr * 0.5 * (1.0 + math.cos(math.pi * epoch / max(cfg.epochs, 1)))


@dataclass
class EpochRecord:
    epoch: int
    sparsity: float
    train_loss: float
    val_accuracy: float
    extra: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        row = {
            "epoch": self.epoch,
            "sparsity": self.sparsity,
            "train_loss": self.train_loss,
            "val_accuracy": self.val_accuracy,
        }
        row.update(self.extra)
        return row


@dataclass
class RunReport:
    """Per-epoch trajectory plus end-of-run accuracy summary."""

    epochs: int
    records: list[EpochRecord] = field(default_factory=list)
    pre_finetune_accuracy: float | None = None
    post_finetune_accuracy: float | None = None
    layerwise: list[dict] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "epochs": self.epochs,
            "records": [r.as_dict() for r in self.records],
            "pre_finetune_accuracy": self.pre_finetune_accuracy,
            "post_finetune_accuracy": self.post_finetune_accuracy,
            "layerwise": self.layerwise,
            "warnings": self.warnings,
        }

    def save_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.as_dict(), indent=2) + "\n")

    def save_metrics_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["epoch", "sparsity", "train_loss", "val_accuracy"])
            for r in self.records:
                writer.writerow([r.epoch, f"{r.sparsity:.12g}", f"{r.train_loss:.12g}", f"{r.val_accuracy:.12g}"])


def evaluate(
    weights: Sequence[np.ndarray],
    features: np.ndarray,
    labels: np.ndarray,
    mask: Sequence[np.ndarray] | None = None,
) -> tuple[float, float]:
    """Mean cross-entropy and top-1 accuracy of the (masked) network."""
    if features.shape[0] == 0:
        return float("nan"), float("nan")
    eff = [w * m for w, m in zip(weights, mask)] if mask is not None else list(weights)
    logits = mlp_logits(features, eff)
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.sum(np.exp(shifted), axis=1, keepdims=True))
    n = features.shape[0]
    loss = float(-np.sum(log_probs[np.arange(n), labels]) / n)
    accuracy = float(np.mean(np.argmax(logits, axis=1) == labels))
    return loss, accuracy


def batch_indices(n: int, batch_size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start : start + batch_size]


def run_masked_epoch(
    weights: list[np.ndarray],
    mask: Sequence[np.ndarray],
    features: np.ndarray,
    labels: np.ndarray,
    batch_size: int,
    optimizer,
    lr: float,
    rng: np.random.Generator,
) -> float:
    """One epoch of masked SGD on the weights, in place. Returns mean loss.

    Pruned entries receive zero gradient through the mask product, so they
    are never updated and stay exactly 0 once zeroed.
    """
    total_loss = 0.0
    n = features.shape[0]
    for idx in batch_indices(n, batch_size, rng):
        leaves = [Tensor(w, requires_grad=True) for w in weights]
        eff = [mul(leaf, Tensor(m)) for leaf, m in zip(leaves, mask)]
        logits = mlp_forward(Tensor(features[idx]), eff)
        loss = softmax_cross_entropy(logits, labels[idx])
        backward(loss)
        value = float(loss.data)
        if not math.isfinite(value):
            raise FloatingPointError(f"training diverged: loss={value}")
        grads = [leaf.grad if leaf.grad is not None else np.zeros_like(leaf.data) for leaf in leaves]
        optimizer.step(weights, grads, lr)
        total_loss += value * idx.size
    return total_loss / n


def finetune(
    weights: Sequence[np.ndarray],
    mask: Sequence[np.ndarray],
    data: DatasetSplit,
    cfg: TrainConfig,
) -> tuple[list[np.ndarray], RunReport]:
    """Train only the masked-in weights for ``cfg.epochs`` epochs.

    Returns fresh weight arrays; the inputs are not modified. The report's
    pre/post accuracies are measured on the test split.
    """
    kept = sum(int(np.sum(m)) for m in mask)
    if kept == 0:
        raise ValueError("finetune: mask keeps no weights")
    trained = [np.asarray(w, dtype=np.float64) * m for w, m in zip(weights, mask)]
    sparsity = mask_sparsity(list(mask))
    report = RunReport(epochs=cfg.epochs)
    _, pre_acc = evaluate(trained, data.test_x, data.test_y)
    report.pre_finetune_accuracy = pre_acc

    optimizer = make_optimizer(cfg.optimizer, trained)
    rng = stream_rng(cfg.seed, STREAM_BATCHES)
    for epoch in range(cfg.epochs):
        mean_loss = run_masked_epoch(
            trained, mask, data.train_x, data.train_y, cfg.batch_size, optimizer, lr_at(cfg, epoch), rng
        )
        _, val_acc = evaluate(trained, data.val_x, data.val_y)
        report.records.append(EpochRecord(epoch=epoch, sparsity=sparsity, train_loss=mean_loss, val_accuracy=val_acc))
    _, post_acc = evaluate(trained, data.test_x, data.test_y)
    report.post_finetune_accuracy = post_acc
    return trained, report
