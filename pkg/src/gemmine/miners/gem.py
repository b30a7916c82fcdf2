"""Score-descent miner with regularization and periodic iterative freezing.

Scores are trained by straight-through gradient descent on the task loss
plus an optional score-norm penalty. Every ``freeze_period`` epochs the
globally smallest unfrozen scores are zeroed and frozen so the unfrozen
fraction tracks the exponential envelope and lands at the target.
"""

from __future__ import annotations

import math

import numpy as np

from ..autodiff import Tensor, abs_all, add, backward, mul, scale, softmax_cross_entropy, ste_round, sum_all
from ..data import DatasetSplit
from ..masking import (
    SIGNED_CONSTANT,
    STREAM_BATCHES,
    MaskedLayer,
    NetworkSpec,
    build_network,
    extract_mask,
    layer_mask,
    mask_sparsity,
    mlp_forward,
    stream_rng,
    unfrozen_fraction,
)
from ..optim import make_optimizer
from ..sanity import layerwise_report
from ..trainer import EpochRecord, RunReport, batch_indices, evaluate
from .common import L1, MinerConfig, MiningResult, SparsitySchedule

__all__ = ["sparsity_envelope", "freeze_step", "gem_mine", "score_regularizer", "check_layer_collapse"]


def sparsity_envelope(epoch: int | float, schedule: SparsitySchedule) -> float:
    """Upper bound on the unfrozen fraction after ``epoch`` epochs."""
    return schedule.envelope(epoch)


def freeze_step(layers: list[MaskedLayer], schedule: SparsitySchedule) -> int:
    """Freeze the globally smallest unfrozen scores, in place.

    The survivor count is floor(keep_factor * unfrozen), which keeps the
    unfrozen fraction at or below the envelope; each event can overshoot
    the envelope downward by at most one weight. Frozen scores are zeroed
    and never thaw. Returns the number of weights frozen.
    """
    unfrozen_per_layer = [layer.freeze.reshape(-1) != 0.0 for layer in layers]
    total_unfrozen = int(sum(int(np.sum(u)) for u in unfrozen_per_layer))
    n_keep = math.floor(schedule.keep_factor * total_unfrozen)
    n_freeze = total_unfrozen - n_keep
    if n_freeze < 1:
        return 0

    scores = np.concatenate([layer.scores.reshape(-1)[u] for layer, u in zip(layers, unfrozen_per_layer)])
    positions = np.concatenate(
        [
            np.stack([np.full(int(np.sum(u)), i), np.flatnonzero(u)], axis=1)
            for i, (layer, u) in enumerate(zip(layers, unfrozen_per_layer))
        ]
    )
    order = np.argsort(scores, kind="stable")[:n_freeze]
    for layer_idx, flat_idx in positions[order]:
        layer = layers[int(layer_idx)]
        layer.freeze.reshape(-1)[int(flat_idx)] = 0.0
        layer.scores.reshape(-1)[int(flat_idx)] = 0.0
    return n_freeze


def check_layer_collapse(layers: list[MaskedLayer], warnings: list[str], when: str) -> None:
    for i, layer in enumerate(layers):
        msg = f"layer_collapse: layer {i} mask is empty ({when})"
        if int(np.sum(layer_mask(layer))) == 0 and msg not in warnings:
            warnings.append(msg)


def score_regularizer(score_leaves: list[Tensor], kind: str) -> Tensor:
    terms = None
    for leaf in score_leaves:
        term = sum_all(abs_all(leaf)) if kind == L1 else sum_all(mul(leaf, leaf))
        terms = term if terms is None else add(terms, term)
    assert terms is not None
    return terms


def gem_mine(
    data: DatasetSplit,
    spec: NetworkSpec,
    schedule: SparsitySchedule,
    config: MinerConfig,
    init_scheme: str = SIGNED_CONSTANT,
) -> MiningResult:
    """Mine a subnetwork by regularized score descent with iterative freezing.

    Weights stay fixed at their initialization; only the scores move. The
    per-epoch report logs the unfrozen fraction as the sparsity column
    (the controlled, monotone quantity) and the current mask density under
    ``mask_sparsity``.
    """
    if data.train_x.shape[0] == 0:
        raise ValueError("gem_mine: empty training split")
    layers = build_network(spec, init_scheme, config.seed)
    scores = [layer.scores for layer in layers]
    optimizer = make_optimizer(config.optimizer, scores)
    rng = stream_rng(config.seed, STREAM_BATCHES)
    report = RunReport(epochs=schedule.total_epochs)

    n = data.train_x.shape[0]
    for epoch in range(1, schedule.total_epochs + 1):
        total_loss = 0.0
        for idx in batch_indices(n, config.batch_size, rng):
            frozen_weights = [layer.weights * layer.freeze for layer in layers]
            leaves = [Tensor(p, requires_grad=True) for p in scores]
            eff = [mul(Tensor(wq), ste_round(leaf)) for wq, leaf in zip(frozen_weights, leaves)]
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
            for p in scores:
                np.clip(p, 0.0, 1.0, out=p)
            total_loss += value * idx.size

        if epoch % schedule.freeze_period == 0:
            freeze_step(layers, schedule)
            check_layer_collapse(layers, report.warnings, when=f"after freeze at epoch {epoch}")

        eff_now = [layer.weights * layer_mask(layer) for layer in layers]
        _, val_acc = evaluate(eff_now, data.val_x, data.val_y)
        report.records.append(
            EpochRecord(
                epoch=epoch,
                sparsity=unfrozen_fraction(layers),
                train_loss=total_loss / n,
                val_accuracy=val_acc,
                extra={"mask_sparsity": mask_sparsity(extract_mask(layers))},
            )
        )

    check_layer_collapse(layers, report.warnings, when="final mask")
    mask = extract_mask(layers)
    eff_final = [layer.weights * m for layer, m in zip(layers, mask)]
    _, pre_acc = evaluate(eff_final, data.test_x, data.test_y)
    report.pre_finetune_accuracy = pre_acc
    report.layerwise = layerwise_report(mask)
    return MiningResult(
        layers=layers,
        mask=mask,
        report=report,
        inversion_scores=[layer.scores.copy() for layer in layers],
    )
