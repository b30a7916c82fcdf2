"""Top-k score miner: weights never move, the mask is the current top-k.

Three ablation axes on the vanilla layerwise form: global top-k across the
whole network, a gradual keep-fraction schedule that follows the same
exponential envelope as the freezing miner, and an optional squared-norm
penalty on the scores (via ``config.reg_weight``).
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from ..autodiff import Tensor, add, backward, mul, scale, softmax_cross_entropy, ste_substitute
from ..data import DatasetSplit
from ..masking import (
    SIGNED_CONSTANT,
    STREAM_BATCHES,
    MaskedLayer,
    NetworkSpec,
    init_scores,
    init_weights,
    mlp_forward,
    stream_rng,
)
from ..optim import make_optimizer
from ..sanity import layerwise_report
from ..trainer import EpochRecord, RunReport, batch_indices, evaluate
from .common import MinerConfig, MiningResult, SparsitySchedule
from .gem import score_regularizer

LAYERWISE = "layerwise"
GLOBAL = "global"

__all__ = ["edge_popup", "topk_mask", "LAYERWISE", "GLOBAL"]


def _kept_count(k: float, size: int) -> int:
    return max(1, int(math.floor(k * size)))


def topk_mask(scores: Sequence[np.ndarray], keep_fraction: float, scope: str, warnings: list[str] | None = None) -> list[np.ndarray]:
    """Binary mask keeping the highest-scoring fraction, per layer or globally."""
    if not (0.0 < keep_fraction <= 1.0):
        raise ValueError(f"keep fraction must be in (0, 1], got {keep_fraction}")
    if scope == LAYERWISE:
        masks = []
        for i, p in enumerate(scores):
            kept = _kept_count(keep_fraction, p.size)
            if warnings is not None and math.floor(keep_fraction * p.size) < 1:
                msg = f"layerwise top-k clamped to 1 weight in layer {i}"
                if msg not in warnings:
                    warnings.append(msg)
            flat = p.reshape(-1)
            mask = np.zeros(p.size)
            mask[np.argsort(-flat, kind="stable")[:kept]] = 1.0
            masks.append(mask.reshape(p.shape))
        return masks
    if scope == GLOBAL:
        flat = np.concatenate([p.reshape(-1) for p in scores])
        kept = _kept_count(keep_fraction, flat.size)
        mask_flat = np.zeros(flat.size)
        mask_flat[np.argsort(-flat, kind="stable")[:kept]] = 1.0
        masks = []
        start = 0
        for p in scores:
            masks.append(mask_flat[start : start + p.size].reshape(p.shape))
            start += p.size
        return masks
    raise ValueError(f"scope must be {LAYERWISE!r} or {GLOBAL!r}, got {scope!r}")


def edge_popup(
    data: DatasetSplit,
    spec: NetworkSpec,
    schedule: SparsitySchedule,
    config: MinerConfig,
    scope: str = LAYERWISE,
    gradual: bool = False,
    init_scheme: str = SIGNED_CONSTANT,
) -> MiningResult:
    """Mine a subnetwork by straight-through descent on top-k scores.

    ``schedule.target_sparsity`` is the keep fraction; with ``gradual`` the
    effective fraction starts at 1 and steps down the envelope every
    ``freeze_period`` epochs, reaching the target at the final epoch.
    Scores are unconstrained here (no unit-interval projection): top-k only
    consumes their ranking.
    """
    if data.train_x.shape[0] == 0:
        raise ValueError("edge_popup: empty training split")
    weights = init_weights(spec, init_scheme, config.seed)
    initial_weights = [w.copy() for w in weights]
    scores = init_scores(spec, config.seed)
    optimizer = make_optimizer(config.optimizer, scores)
    rng = stream_rng(config.seed, STREAM_BATCHES)
    report = RunReport(epochs=schedule.total_epochs)

    target_k = schedule.target_sparsity
    n = data.train_x.shape[0]
    for epoch in range(1, schedule.total_epochs + 1):
        if gradual:
            # staircase along the envelope, updated once per freeze period
            steps_done = (epoch - 1) // schedule.freeze_period
            current_k = schedule.envelope(steps_done * schedule.freeze_period)
        else:
            current_k = target_k
        total_loss = 0.0
        for idx in batch_indices(n, config.batch_size, rng):
            mask_now = topk_mask(scores, current_k, scope, report.warnings)
            leaves = [Tensor(p, requires_grad=True) for p in scores]
            eff = [mul(Tensor(w), ste_substitute(leaf, m)) for w, leaf, m in zip(weights, leaves, mask_now)]
            logits = mlp_forward(Tensor(data.train_x[idx]), eff)
            loss = softmax_cross_entropy(logits, data.train_y[idx])
            if config.reg_weight > 0.0:
                loss = add(loss, scale(score_regularizer(leaves, config.regularizer), config.reg_weight))
            backward(loss)
            value = float(loss.data)
            if not math.isfinite(value):
                raise FloatingPointError(f"score mining diverged: loss={value}")
            grads = [leaf.grad if leaf.grad is not None else np.zeros_like(leaf.data) for leaf in leaves]
            optimizer.step(scores, grads, config.lr)
            total_loss += value * idx.size

        mask_epoch = topk_mask(scores, current_k, scope, report.warnings)
        eff_now = [w * m for w, m in zip(weights, mask_epoch)]
        _, val_acc = evaluate(eff_now, data.val_x, data.val_y)
        report.records.append(
            EpochRecord(epoch=epoch, sparsity=current_k, train_loss=total_loss / n, val_accuracy=val_acc)
        )

    final_mask = topk_mask(scores, target_k, scope, report.warnings)
    eff_final = [w * m for w, m in zip(weights, final_mask)]
    _, pre_acc = evaluate(eff_final, data.test_x, data.test_y)
    report.pre_finetune_accuracy = pre_acc
    report.layerwise = layerwise_report(final_mask)
    # scores are rank-only here, so the stored layer encodes the final
    # selection directly: round(mask) * mask reproduces it exactly
    layers = [
        MaskedLayer(weights=w, scores=m.copy(), freeze=m.copy())
        for w, m in zip(weights, final_mask)
    ]
    if any(not np.array_equal(w, w0) for w, w0 in zip(weights, initial_weights)):
        raise AssertionError("edge_popup must never update weights")
    return MiningResult(
        layers=layers,
        mask=final_mask,
        report=report,
        inversion_scores=[p.copy() for p in scores],
    )
