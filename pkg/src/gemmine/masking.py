"""Masked-network representation shared by every miner.

A network is a list of :class:`MaskedLayer` values: fixed random weights,
trainable scores in [0, 1], and a monotone freeze mask. The binary mask
actually applied to the weights is ``round(scores) * freeze``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .autodiff import Tensor, linear, relu

SIGNED_CONSTANT = "signed_constant"
SCALED_NORMAL = "scaled_normal"
INIT_SCHEMES = (SIGNED_CONSTANT, SCALED_NORMAL)

# rng stream tags, so one run seed yields independent deterministic streams
STREAM_WEIGHTS = 11
STREAM_SCORES = 12
STREAM_BATCHES = 13
STREAM_SAMPLING = 14


def stream_rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([stream, int(seed)])


@dataclass(frozen=True)
class NetworkSpec:
    """Layer widths of a fully-connected ReLU network, input first."""

    widths: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        if len(self.widths) < 3:
            raise ValueError(f"NetworkSpec needs at least one hidden layer, got widths {self.widths}")
        if any(w < 1 for w in self.widths):
            raise ValueError(f"NetworkSpec widths must be positive, got {self.widths}")

    @property
    def n_layers(self) -> int:
        return len(self.widths) - 1

    @property
    def layer_shapes(self) -> list[tuple[int, int]]:
        return [(self.widths[i + 1], self.widths[i]) for i in range(self.n_layers)]

    @property
    def total_params(self) -> int:
        return sum(o * i for o, i in self.layer_shapes)


@dataclass
class MaskedLayer:
    """One layer: weights (fan_out, fan_in), scores in [0,1], freeze in {0,1}."""

    weights: np.ndarray
    scores: np.ndarray
    freeze: np.ndarray

    def __post_init__(self):
        if not (self.weights.shape == self.scores.shape == self.freeze.shape):
            raise ValueError(
                "MaskedLayer fields must share one shape, got "
                f"{self.weights.shape}/{self.scores.shape}/{self.freeze.shape}"
            )


Mask = list[np.ndarray]


def round_scores(scores: np.ndarray) -> np.ndarray:
    """Deterministic rounding: 1 exactly where score >= 0.5."""
    return (np.asarray(scores, dtype=np.float64) >= 0.5).astype(np.float64)


def project_unit_interval(scores: np.ndarray) -> np.ndarray:
    return np.clip(scores, 0.0, 1.0)


def layer_mask(layer: MaskedLayer) -> np.ndarray:
    return round_scores(layer.scores) * layer.freeze


def effective_weights(layer: MaskedLayer) -> np.ndarray:
    """weights * freeze * round(scores); frozen entries are 0 regardless of score."""
    return layer.weights * layer.freeze * round_scores(layer.scores)


def extract_mask(layers: Sequence[MaskedLayer]) -> Mask:
    return [layer_mask(layer) for layer in layers]


def global_sparsity(layers: Sequence[MaskedLayer]) -> float:
    """Fraction of weights kept by the current mask across the whole network."""
    if len(layers) == 0:
        raise ValueError("global_sparsity: empty network")
    kept = sum(int(np.sum(layer_mask(layer))) for layer in layers)
    total = sum(layer.weights.size for layer in layers)
    return kept / total


def mask_sparsity(mask: Sequence[np.ndarray]) -> float:
    if len(mask) == 0:
        raise ValueError("mask_sparsity: empty mask")
    return sum(int(np.sum(m)) for m in mask) / sum(m.size for m in mask)


def kept_counts(mask: Sequence[np.ndarray]) -> list[int]:
    return [int(np.sum(m)) for m in mask]


def unfrozen_fraction(layers: Sequence[MaskedLayer]) -> float:
    total = sum(layer.freeze.size for layer in layers)
    return sum(int(np.sum(layer.freeze)) for layer in layers) / total


def layer_stddev(fan_in: int) -> float:
    # fan-in scaled magnitude used by both init schemes
    return float(np.sqrt(2.0 / fan_in))


def init_weights(spec: NetworkSpec, scheme: str, seed: int) -> list[np.ndarray]:
    """Draw per-layer weights.

    ``signed_constant``: every entry is +/- sqrt(2 / fan_in), sign uniform.
    ``scaled_normal``: zero-mean normal with the same per-layer stddev.
    """
    if scheme not in INIT_SCHEMES:
        raise ValueError(f"unknown init scheme {scheme!r}, expected one of {INIT_SCHEMES}")
    rng = stream_rng(seed, STREAM_WEIGHTS)
    out = []
    for fan_out, fan_in in spec.layer_shapes:
        sigma = layer_stddev(fan_in)
        if scheme == SIGNED_CONSTANT:
            signs = rng.integers(0, 2, size=(fan_out, fan_in)).astype(np.float64) * 2.0 - 1.0
            out.append(signs * sigma)
        else:
            out.append(rng.normal(0.0, sigma, size=(fan_out, fan_in)))
    return out


def init_scores(spec: NetworkSpec, seed: int) -> list[np.ndarray]:
    """Scores i.i.d. uniform on [0, 1], one tensor per layer."""
    rng = stream_rng(seed, STREAM_SCORES)
    return [rng.random(size=(fan_out, fan_in)) for fan_out, fan_in in spec.layer_shapes]


def build_network(spec: NetworkSpec, scheme: str, seed: int) -> list[MaskedLayer]:
    weights = init_weights(spec, scheme, seed)
    scores = init_scores(spec, seed)
    return [
        MaskedLayer(weights=w, scores=p, freeze=np.ones_like(w))
        for w, p in zip(weights, scores)
    ]


def mlp_forward(x: Tensor, layer_weights: Sequence[Tensor]) -> Tensor:
    """Logits of the ReLU MLP defined by per-layer weight tensors."""
    out = x
    last = len(layer_weights) - 1
    for i, w in enumerate(layer_weights):
        out = linear(out, w)
        if i != last:
            out = relu(out)
    return out


def mlp_logits(features: np.ndarray, layer_weights: Sequence[np.ndarray]) -> np.ndarray:
    """Graph-free forward pass for evaluation."""
    out = np.asarray(features, dtype=np.float64)
    last = len(layer_weights) - 1
    for i, w in enumerate(layer_weights):
        out = out @ w.T
        if i != last:
            out = np.where(out > 0.0, out, 0.0)
    return out
