"""Mask sanity transformations and layerwise mask analytics.

A mined mask passes the suite when its finetuned accuracy beats each
transformed variant by a configured margin: the transformations destroy
everything about a mask except its layerwise sparsity profile.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .masking import MaskedLayer, NetworkSpec, init_weights

SHUFFLE = "shuffle"
REINIT = "reinit"
INVERT = "invert"
VARIANT_KINDS = (SHUFFLE, REINIT, INVERT)


@dataclass(frozen=True)
class SanityVariant:
    kind: str
    seed: int = 0

    def __post_init__(self):
        if self.kind not in VARIANT_KINDS:
            raise ValueError(f"sanity variant must be one of {VARIANT_KINDS}, got {self.kind!r}")


def shuffle_mask(mask: Sequence[np.ndarray], seed: int) -> list[np.ndarray]:
    """Permute each layer's mask entries uniformly; kept counts are untouched."""
    rng = np.random.default_rng(seed)
    out = []
    for m in mask:
        flat = m.reshape(-1)
        out.append(flat[rng.permutation(flat.size)].reshape(m.shape))
    return out


def reinit_weights(
    layers: Sequence[MaskedLayer], spec: NetworkSpec, scheme: str, seed: int
) -> list[MaskedLayer]:
    """Fresh weights from the original distribution; scores and freeze untouched."""
    fresh = init_weights(spec, scheme, seed)
    return [
        MaskedLayer(weights=w, scores=layer.scores.copy(), freeze=layer.freeze.copy())
        for layer, w in zip(layers, fresh)
    ]


def invert_scores(
    scores: Sequence[np.ndarray], reference_mask: Sequence[np.ndarray]
) -> tuple[list[np.ndarray], list[str]]:
    """Keep the lowest-scoring weights instead of the highest.

    Per layer, exactly as many weights survive as in the reference mask.
    Returns the inverted mask plus warnings for degenerate all-equal layers.
    """
    if len(scores) != len(reference_mask):
        raise ValueError(f"{len(scores)} score tensors for {len(reference_mask)} mask layers")
    warnings: list[str] = []
    out = []
    for i, (p, m) in enumerate(zip(scores, reference_mask)):
        kept = int(np.sum(m))
        flat = p.reshape(-1)
        if flat.size and np.ptp(flat) == 0.0:
            warnings.append(f"inversion degenerate: all scores equal in layer {i}")
        inverted = np.zeros(flat.size)
        inverted[np.argsort(flat, kind="stable")[:kept]] = 1.0
        out.append(inverted.reshape(p.shape))
    return out, warnings


def layerwise_report(mask: Sequence[np.ndarray]) -> list[dict]:
    """Exact per-layer kept counts plus a global summary row."""
    rows = []
    total_params = 0
    total_kept = 0
    for i, m in enumerate(mask):
        kept = int(np.sum(m))
        rows.append(
            {
                "layer_index": i,
                "params": int(m.size),
                "kept": kept,
                "keep_fraction": kept / m.size,
                "collapsed": kept == 0,
            }
        )
        total_params += m.size
        total_kept += kept
    rows.append(
        {
            "layer_index": "global",
            "params": total_params,
            "kept": total_kept,
            "keep_fraction": total_kept / total_params,
            "collapsed": total_kept == 0,
        }
    )
    return rows


def write_layerwise_csv(path: str | Path, rows: Sequence[dict]) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["layer_index", "params", "kept", "keep_fraction"])
        for row in rows:
            writer.writerow([row["layer_index"], row["params"], row["kept"], f"{row['keep_fraction']:.12g}"])
