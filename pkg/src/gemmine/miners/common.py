"""Shared miner configuration types and the mining result record."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..masking import MaskedLayer
from ..optim import OptimizerChoice, SgdMomentum
from ..trainer import RunReport

L2 = "l2"
L1 = "l1"


@dataclass(frozen=True)
class SparsitySchedule:
    """Exponential sparsity envelope: from 1 at epoch 0 down to the target.

    The decay rate is fixed so the envelope lands exactly on the target
    after the final epoch; freezing is applied every ``freeze_period``
    epochs.
    """

    target_sparsity: float
    total_epochs: int
    freeze_period: int

    def __post_init__(self):
        if not (0.0 < self.target_sparsity <= 1.0):
            raise ValueError(f"target sparsity must be in (0, 1], got {self.target_sparsity}")
        if self.total_epochs < 1 or self.freeze_period < 1:
            raise ValueError(f"epochs and freeze period must be positive, got {self.total_epochs}, {self.freeze_period}")
        if self.freeze_period > self.total_epochs or self.total_epochs % self.freeze_period != 0:
            raise ValueError(
                f"freeze period {self.freeze_period} must divide total epochs {self.total_epochs}"
            )

    @property
    def decay_rate(self) -> float:
        return math.log(1.0 / self.target_sparsity) / self.total_epochs

    @property
    def keep_factor(self) -> float:
        """Fraction of unfrozen weights surviving one freeze event."""
        return math.exp(-self.decay_rate * self.freeze_period)

    @property
    def n_events(self) -> int:
        return self.total_epochs // self.freeze_period

    def envelope(self, epoch: int | float) -> float:
        if epoch < 0 or epoch > self.total_epochs:
            raise ValueError(f"epoch {epoch} outside [0, {self.total_epochs}]")
        return math.exp(-self.decay_rate * epoch)


@dataclass(frozen=True)
class MinerConfig:
    """Hyperparameters common to the score-optimizing miners."""

    lr: float = 0.1
    reg_weight: float = 0.0
    regularizer: str = L2
    optimizer: OptimizerChoice = SgdMomentum()
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError(f"learning rate must be positive, got {self.lr}")
        if self.reg_weight < 0:
            raise ValueError(f"regularization weight must be >= 0, got {self.reg_weight}")
        if self.regularizer not in (L1, L2):
            raise ValueError(f"regularizer must be one of ({L1!r}, {L2!r}), got {self.regularizer!r}")
        if self.batch_size < 1:
            raise ValueError(f"batch size must be positive, got {self.batch_size}")


@dataclass
class MiningResult:
    """What a miner hands back: the network state, its mask, and a report.

    ``inversion_scores`` carries the per-weight importances a score-inversion
    sanity check needs (final scores for score-based miners, weight
    magnitudes at prune time for magnitude-based ones).
    """

    layers: list[MaskedLayer]
    mask: list[np.ndarray]
    report: RunReport
    inversion_scores: list[np.ndarray] | None = None
    layer_ratios: "LayerRatios | None" = None
    round_masks: list[list[np.ndarray]] | None = None

    @property
    def weights(self) -> list[np.ndarray]:
        return [layer.weights for layer in self.layers]


@dataclass(frozen=True)
class LayerRatios:
    """Per-layer keep fractions in (0, 1]."""

    ratios: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "ratios", tuple(float(r) for r in self.ratios))
        if any(not (0.0 < r <= 1.0) for r in self.ratios):
            raise ValueError(f"keep ratios must be in (0, 1], got {self.ratios}")

    def __len__(self) -> int:
        return len(self.ratios)


def flatten_layers(arrays: Sequence[np.ndarray]) -> np.ndarray:
    return np.concatenate([a.reshape(-1) for a in arrays])


def split_flat(flat: np.ndarray, like: Sequence[np.ndarray]) -> list[np.ndarray]:
    out = []
    start = 0
    for a in like:
        out.append(flat[start : start + a.size].reshape(a.shape))
        start += a.size
    return out
