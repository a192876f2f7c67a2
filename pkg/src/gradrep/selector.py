"""Gradient-preference feature selection and repository construction.

Each training image gets a per-position score map: the absolute value
of a 3x3 Laplacian response summed over channels, min-max normalized
to [0, 1]. The normalized score is then used as a keep-probability,
so positions on strong feature gradients are kept often but flat
regions still contribute. The kept feature vectors from all training
images form the repository the rest of the pipeline compares against.

Selection modes
---------------
``gradient``  keep position (r, c) with probability S(r, c)
``random``    keep with a constant probability equal to mean(S), which
              matches the expected repository size of ``gradient`` while
              removing the spatial preference (ablation baseline)
``all``       keep every position
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .seeding import stream_rng

SELECTION_MODES = ("gradient", "random", "all")


@dataclass
class Repository:
    """Feature vectors kept from the training set, with their origins.

    ``rows`` is (M, C) float32; ``provenance[m]`` is (sample_id, row, col)
    naming the position row m was copied from, bit-exactly.
    """

    rows: np.ndarray
    provenance: list[tuple[str, int, int]]

    def __post_init__(self) -> None:
        if self.rows.ndim != 2 or self.rows.shape[0] < 1:
            raise ValueError("repository must hold at least one row")
        if len(self.provenance) != self.rows.shape[0]:
            raise ValueError("provenance length must equal the number of rows")

    def __len__(self) -> int:
        return self.rows.shape[0]


def laplacian_response(features: np.ndarray) -> np.ndarray:
    """Raw gradient magnitude map of a (C, H, W) feature map.

    Convolves with the 3x3 sharpening Laplacian (center 8, neighbors -1;
    weights sum to zero, so constant regions score 0) under replicate
    padding; responses are summed across channels before taking the
    absolute value. Because the same kernel acts on every channel,
    summing channels first and convolving once is equivalent and cheaper.
    """
    if features.ndim != 3 or min(features.shape) < 1:
        raise ValueError(f"expected 3-d feature map, got shape {features.shape}")
    total = features.astype(np.float64).sum(axis=0)
    p = np.pad(total, 1, mode="edge")
    response = 8.0 * p[1:-1, 1:-1] - (
        p[:-2, :-2] + p[:-2, 1:-1] + p[:-2, 2:]
        + p[1:-1, :-2] + p[1:-1, 2:]
        + p[2:, :-2] + p[2:, 1:-1] + p[2:, 2:]
    )
    return np.abs(response)


def normalize_scores(raw: np.ndarray) -> np.ndarray:
    """Min-max normalize a score map to [0, 1]; constant maps become all zeros."""
    raw = np.asarray(raw, dtype=np.float64)
    if not np.isfinite(raw).all():
        raise ValueError("score map contains non-finite values")
    if raw.min() < 0:
        raise ValueError("score map must be non-negative")
    lo = raw.min()
    hi = raw.max()
    if hi == lo:
        return np.zeros_like(raw)
    return (raw - lo) / (hi - lo)


def sample_selection_mask(scores: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Draw the stochastic keep-mask: bit (r, c) set iff S(r, c) > U(0, 1).

    One uniform variate is consumed per position in row-major order, so a
    fixed generator state yields a fixed mask.
    """
    scores = np.asarray(scores, dtype=np.float64)
    u = rng.random(scores.shape)
    return scores > u


def selection_scores(features: np.ndarray, mode: str) -> np.ndarray:
    """Normalized keep-probability map for one image under the given mode."""
    if mode not in SELECTION_MODES:
        raise ValueError(f"unknown selection mode {mode!r}")
    grad = normalize_scores(laplacian_response(features))
    if mode == "gradient":
        return grad
    if mode == "random":
        return np.full_like(grad, grad.mean())
    return np.ones_like(grad)  # "all"


def _fallback_positions(scores: np.ndarray) -> np.ndarray:
    """Top ceil(1% of H*W) positions by score, ties broken in row-major order."""
    flat = scores.ravel()
    k = -(-flat.size // 100)  # ceil(0.01 * H * W)
    order = np.argsort(-flat, kind="stable")
    return order[:k]


def _gather_rows(
    features: np.ndarray, mask: np.ndarray, sample_id: str
) -> tuple[np.ndarray, list[tuple[str, int, int]]]:
    rsel, csel = np.nonzero(mask)
    provenance = [(sample_id, r, c) for r, c in zip(rsel.tolist(), csel.tolist())]
    return features[:, mask].T.copy(), provenance


def build_repository(
    samples: Iterable[tuple[str, np.ndarray]],
    master_seed: int,
    mode: str = "gradient",
) -> Repository:
    """Build the feature repository from fused training maps.

    ``samples`` yields (sample_id, (C, H, W) float32 map) in a fixed order;
    it may be a lazy iterable, and only one map is held at a time. Image i
    draws its mask from an independent RNG stream keyed by its position in
    the sequence, so repositories are reproducible and images may be
    processed in parallel without changing the result.

    If the stochastic selection keeps nothing at all (degenerate score
    maps), every image falls back to its top 1% of positions by score so
    the repository is never empty. The fallback rows are gathered during
    the single pass, so lazy iterables are never re-read.
    """
    channels: int | None = None
    selected: list[np.ndarray] = []
    provenance: list[tuple[str, int, int]] = []
    fallback_rows: list[np.ndarray] = []
    fallback_prov: list[tuple[str, int, int]] = []

    for index, (sample_id, features) in enumerate(samples):
        if channels is None:
            channels = features.shape[0]
        elif features.shape[0] != channels:
            raise ValueError(
                f"sample {sample_id!r} has {features.shape[0]} channels, expected {channels}"
            )
        scores = selection_scores(features, mode)
        if mode == "all":
            mask = np.ones(scores.shape, dtype=bool)
        else:
            mask = sample_selection_mask(scores, stream_rng(master_seed, "selection", index))
        rows, prov = _gather_rows(features, mask, sample_id)
        selected.append(rows)
        provenance.extend(prov)

        fb_mask = np.zeros(scores.shape, dtype=bool)
        fb_mask.ravel()[_fallback_positions(scores)] = True
        rows, prov = _gather_rows(features, fb_mask, sample_id)
        fallback_rows.append(rows)
        fallback_prov.extend(prov)

    if channels is None:
        raise ValueError("build_repository needs at least one training sample")
    if not provenance:
        selected, provenance = fallback_rows, fallback_prov
    return Repository(rows=np.concatenate(selected, axis=0), provenance=provenance)
