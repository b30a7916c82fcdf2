"""Random subnetwork sampling with engineered per-layer keep ratios.

Variant rules (L = layer count, layers indexed 1..L):

    v1  smooth polynomial decay across layers 1..L-1, last layer keeps 0.3
    v2  v1 ratios for interior layers, a reference mining profile for 1 and L
    v3  v1 ratios for interior layers, layers 1 and L fully dense
    v4  a reference magnitude-pruning profile rescaled to the target
    v5  v2 ratios refined by stochastic descent on the sampled-mask loss
    v6  v4 ratios refined the same way

Given ratios, each layer keeps exactly floor(ratio * params) uniformly
random weights.
"""

from __future__ import annotations

import math

import numpy as np

from ..autodiff import Tensor, backward, mul, softmax_cross_entropy
from ..data import DatasetSplit
from ..masking import (
    SCALED_NORMAL,
    STREAM_SAMPLING,
    MaskedLayer,
    NetworkSpec,
    init_weights,
    mlp_forward,
    stream_rng,
)
from ..sanity import layerwise_report
from ..trainer import RunReport, evaluate
from .common import LayerRatios, MiningResult

VARIANTS = ("v1", "v2", "v3", "v4", "v5", "v6")
MIN_RATIO = 1e-3

__all__ = ["smart_ratio", "smooth_ratios", "tune_ratios", "sample_ratio_mask", "VARIANTS"]


def _fill_to_budget(weights_per_layer: list[int], raw: list[float], budget: float) -> list[float]:
    """Scale raw ratios so sum(ratio * params) == budget, clamping at 1."""
    ratios = [0.0] * len(raw)
    active = list(range(len(raw)))
    remaining = budget
    while active:
        mass = sum(raw[i] * weights_per_layer[i] for i in active)
        if mass <= 0.0:
            break
        alpha = remaining / mass
        overflow = [i for i in active if alpha * raw[i] > 1.0]
        if not overflow:
            for i in active:
                ratios[i] = alpha * raw[i]
            break
        for i in overflow:
            ratios[i] = 1.0
            remaining -= weights_per_layer[i]
            active.remove(i)
    return [min(1.0, max(MIN_RATIO, r)) for r in ratios]


def smooth_ratios(spec: NetworkSpec, target_sparsity: float, last_layer_keep: float = 0.3) -> LayerRatios:
    """Polynomially decaying keep ratios hitting the global target.

    Layer l of L gets a ratio proportional to (L - l + 1)^2 for l < L; the
    last layer is pinned at ``last_layer_keep``.
    """
    n_layers = spec.n_layers
    sizes = [o * i for o, i in spec.layer_shapes]
    total = spec.total_params
    budget = target_sparsity * total - last_layer_keep * sizes[-1]
    budget = max(budget, 0.0)
    raw = [float((n_layers - l + 1) ** 2) for l in range(1, n_layers)]
    interior = _fill_to_budget(sizes[:-1], raw, budget) if n_layers > 1 else []
    return LayerRatios(tuple(interior) + (last_layer_keep,))


def sample_ratio_mask(spec: NetworkSpec, ratios: LayerRatios, seed: int, warnings: list[str]) -> list[np.ndarray]:
    """Uniformly random per-layer masks keeping exactly floor(ratio * params)."""
    if len(ratios) != spec.n_layers:
        raise ValueError(f"{len(ratios)} ratios for {spec.n_layers} layers")
    rng = stream_rng(seed, STREAM_SAMPLING)
    mask = []
    for i, ((fan_out, fan_in), ratio) in enumerate(zip(spec.layer_shapes, ratios.ratios)):
        size = fan_out * fan_in
        kept = math.floor(ratio * size)
        if kept < 1:
            kept = 1
            msg = f"ratio {ratio:.3g} keeps no weights in layer {i}, clamped to 1"
            if msg not in warnings:
                warnings.append(msg)
        flat = np.zeros(size)
        flat[rng.choice(size, size=kept, replace=False)] = 1.0
        mask.append(flat.reshape(fan_out, fan_in))
    return mask


def tune_ratios(
    p0: LayerRatios,
    weights: list[np.ndarray],
    data: DatasetSplit,
    steps: int,
    lr: float,
    seed: int = 0,
    batch_size: int = 64,
) -> LayerRatios:
    """Stochastic descent on the expected loss of Bernoulli-sampled masks.

    Each step samples per-layer masks with the current keep probabilities,
    takes the gradient of the batch loss with respect to the sampled mask
    entries, sums it per layer, and moves the keep probabilities downhill.
    Results are clamped to (1e-3, 1].
    """
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    ratios = np.array(p0.ratios, dtype=np.float64)
    rng = stream_rng(seed, STREAM_SAMPLING)
    n = data.train_x.shape[0]
    for _ in range(steps):
        idx = rng.choice(n, size=min(batch_size, n), replace=False)
        mask_leaves = [
            Tensor((rng.random(w.shape) < r).astype(np.float64), requires_grad=True)
            for w, r in zip(weights, ratios)
        ]
        eff = [mul(Tensor(w), leaf) for w, leaf in zip(weights, mask_leaves)]
        logits = mlp_forward(Tensor(data.train_x[idx]), eff)
        loss = softmax_cross_entropy(logits, data.train_y[idx])
        backward(loss)
        grad = np.array(
            [float(np.sum(leaf.grad)) if leaf.grad is not None else 0.0 for leaf in mask_leaves]
        )
        ratios = np.clip(ratios - lr * grad, MIN_RATIO, 1.0)
    return LayerRatios(tuple(ratios))


def smart_ratio(
    spec: NetworkSpec,
    target_sparsity: float,
    variant: str,
    seed: int,
    data: DatasetSplit | None = None,
    weights: list[np.ndarray] | None = None,
    reference_profile: LayerRatios | None = None,
    imp_profile: LayerRatios | None = None,
    last_layer_keep: float = 0.3,
    tune_steps: int = 50,
    tune_lr: float = 0.01,
    init_scheme: str = SCALED_NORMAL,
) -> MiningResult:
    """Build a random subnetwork from the selected ratio rule.

    v2/v5 need ``reference_profile`` (a mined layerwise profile), v4/v6 need
    ``imp_profile``, and v5/v6 need ``data`` for ratio tuning. The achieved
    global sparsity follows the ratios, which only v1 (and v4's rescaling)
    tie to the requested target.
    """
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}, got {variant!r}")
    if not (0.0 < target_sparsity <= 1.0):
        raise ValueError(f"target sparsity must be in (0, 1], got {target_sparsity}")
    if variant in ("v2", "v5") and reference_profile is None:
        raise ValueError(f"{variant} needs a reference mining profile")
    if variant in ("v4", "v6") and imp_profile is None:
        raise ValueError(f"{variant} needs a magnitude-pruning profile")
    if variant in ("v5", "v6") and data is None:
        raise ValueError(f"{variant} needs data to tune ratios")

    if weights is None:
        weights = init_weights(spec, init_scheme, seed)
    sizes = [o * i for o, i in spec.layer_shapes]

    base = smooth_ratios(spec, target_sparsity, last_layer_keep)
    if variant == "v1":
        ratios = base
    elif variant in ("v2", "v5"):
        assert reference_profile is not None
        values = list(base.ratios)
        values[0] = reference_profile.ratios[0]
        values[-1] = reference_profile.ratios[-1]
        ratios = LayerRatios(tuple(values))
    elif variant == "v3":
        values = list(base.ratios)
        values[0] = 1.0
        values[-1] = 1.0
        ratios = LayerRatios(tuple(values))
    else:  # v4 / v6
        assert imp_profile is not None
        ratios = LayerRatios(tuple(_fill_to_budget(sizes, list(imp_profile.ratios), target_sparsity * sum(sizes))))

    if variant in ("v5", "v6"):
        assert data is not None
        ratios = tune_ratios(ratios, weights, data, steps=tune_steps, lr=tune_lr, seed=seed)

    report = RunReport(epochs=0)
    mask = sample_ratio_mask(spec, ratios, seed, report.warnings)
    report.layerwise = layerwise_report(mask)
    eff = [w * m for w, m in zip(weights, mask)]
    if data is not None:
        _, pre_acc = evaluate(eff, data.test_x, data.test_y)
        report.pre_finetune_accuracy = pre_acc
    layers = [
        MaskedLayer(weights=w, scores=m.copy(), freeze=m.copy())
        for w, m in zip(weights, mask)
    ]
    return MiningResult(layers=layers, mask=mask, report=report, inversion_scores=None, layer_ratios=ratios)
