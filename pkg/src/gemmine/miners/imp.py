"""Iterative magnitude pruning with cold / warm / learning-rate rewinding.

Each round trains the surviving weights, prunes the smallest-magnitude
fraction of them globally, then either rewinds the survivors to their
initial values (cold), to an early checkpoint from round one (warm), or
keeps them and restarts only the learning-rate schedule (lr_rewind).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..data import DatasetSplit
from ..masking import SCALED_NORMAL, STREAM_BATCHES, MaskedLayer, NetworkSpec, init_weights, stream_rng
from ..optim import make_optimizer
from ..sanity import layerwise_report
from ..trainer import EpochRecord, RunReport, evaluate, run_masked_epoch
from .common import MinerConfig, MiningResult

COLD = "cold"
WARM = "warm"
LR_REWIND = "lr_rewind"

__all__ = ["imp", "RewindSpec", "COLD", "WARM", "LR_REWIND", "prune_by_magnitude"]


@dataclass(frozen=True)
class RewindSpec:
    kind: str = COLD
    warm_epoch: int = 1  # 1-indexed epoch of round one whose weights warm rewinding restores

    def __post_init__(self):
        if self.kind not in (COLD, WARM, LR_REWIND):
            raise ValueError(f"rewind kind must be one of ({COLD!r}, {WARM!r}, {LR_REWIND!r}), got {self.kind!r}")
        if self.kind == WARM and self.warm_epoch < 1:
            raise ValueError(f"warm rewind epoch must be >= 1, got {self.warm_epoch}")


def prune_by_magnitude(
    weights: list[np.ndarray], mask: list[np.ndarray], prune_rate: float, warnings: list[str]
) -> list[np.ndarray]:
    """Zero out the smallest-magnitude fraction of currently kept weights, globally."""
    flat_w = np.concatenate([w.reshape(-1) for w in weights])
    flat_m = np.concatenate([m.reshape(-1) for m in mask])
    alive = np.flatnonzero(flat_m != 0.0)
    n_prune = int(prune_rate * alive.size + 0.5)
    if alive.size - n_prune < 1:
        n_prune = alive.size - 1
        msg = "magnitude pruning clamped to keep 1 weight"
        if msg not in warnings:
            warnings.append(msg)
    if n_prune <= 0:
        return [m.copy() for m in mask]
    order = np.argsort(np.abs(flat_w[alive]), kind="stable")[:n_prune]
    flat_m = flat_m.copy()
    flat_m[alive[order]] = 0.0
    out = []
    start = 0
    for m in mask:
        out.append(flat_m[start : start + m.size].reshape(m.shape))
        start += m.size
    return out


def _cosine_lr(base: float, epoch: int, total: int) -> float:
    return base * 0.5 * (1.0 + math.cos(math.pi * epoch / max(total, 1)))


def imp(
    data: DatasetSplit,
    spec: NetworkSpec,
    rounds: int,
    prune_rate: float,
    rewind: RewindSpec,
    epochs_per_round: int,
    config: MinerConfig,
    init_scheme: str = SCALED_NORMAL,
) -> MiningResult:
    """Run ``rounds`` of train / global-magnitude-prune / rewind.

    The kept fraction after round r is (1 - prune_rate)^r up to integer
    rounding; masks are nested across rounds. With zero epochs per round the
    procedure reduces to magnitude sorts of the initialization.
    """
    if not (0.0 < prune_rate < 1.0):
        raise ValueError(f"prune rate must be in (0, 1), got {prune_rate}")
    if rounds < 1:
        raise ValueError(f"rounds must be >= 1, got {rounds}")
    if epochs_per_round < 0:
        raise ValueError(f"epochs_per_round must be >= 0, got {epochs_per_round}")
    if rewind.kind == WARM and rewind.warm_epoch >= max(epochs_per_round, 1):
        raise ValueError(
            f"warm rewind epoch {rewind.warm_epoch} must be < epochs per round {epochs_per_round}"
        )

    initial = init_weights(spec, init_scheme, config.seed)
    weights = [w.copy() for w in initial]
    mask = [np.ones_like(w) for w in initial]
    total = sum(w.size for w in initial)
    report = RunReport(epochs=rounds * epochs_per_round)
    rng = stream_rng(config.seed, STREAM_BATCHES)
    warm_checkpoint: list[np.ndarray] | None = None
    magnitudes = [np.abs(w) for w in weights]
    round_masks: list[list[np.ndarray]] = []

    for round_idx in range(rounds):
        optimizer = make_optimizer(config.optimizer, weights)
        kept_fraction = sum(int(np.sum(m)) for m in mask) / total
        for epoch in range(epochs_per_round):
            lr = _cosine_lr(config.lr, epoch, epochs_per_round)
            mean_loss = run_masked_epoch(
                weights, mask, data.train_x, data.train_y, config.batch_size, optimizer, lr, rng
            )
            for w, m in zip(weights, mask):
                w *= m
            if round_idx == 0 and rewind.kind == WARM and epoch + 1 == rewind.warm_epoch:
                warm_checkpoint = [w.copy() for w in weights]
            _, val_acc = evaluate(weights, data.val_x, data.val_y)
            report.records.append(
                EpochRecord(
                    epoch=round_idx * epochs_per_round + epoch,
                    sparsity=kept_fraction,
                    train_loss=mean_loss,
                    val_accuracy=val_acc,
                )
            )

        magnitudes = [np.abs(w) for w in weights]
        mask = prune_by_magnitude(weights, mask, prune_rate, report.warnings)
        round_masks.append([m.copy() for m in mask])
        if rewind.kind == COLD:
            weights = [w0 * m for w0, m in zip(initial, mask)]
        elif rewind.kind == WARM:
            source = warm_checkpoint if warm_checkpoint is not None else initial
            weights = [w0 * m for w0, m in zip(source, mask)]
        else:
            weights = [w * m for w, m in zip(weights, mask)]

    eff = [w * m for w, m in zip(weights, mask)]
    _, pre_acc = evaluate(eff, data.test_x, data.test_y)
    report.pre_finetune_accuracy = pre_acc
    report.layerwise = layerwise_report(mask)
    layers = [
        MaskedLayer(weights=w, scores=m.copy(), freeze=m.copy())
        for w, m in zip(weights, mask)
    ]
    return MiningResult(
        layers=layers, mask=mask, report=report, inversion_scores=magnitudes, round_masks=round_masks
    )
