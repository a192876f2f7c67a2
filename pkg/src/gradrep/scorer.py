"""Inference: per-position nearest-repository distances and attention maps.

Every spatial position of a test image's fused feature map is pushed
through the trained mapping and scored by its exact Euclidean distance
to the closest repository row (no approximate index, no test-time
selection). The image-level score is the maximum pixel score before
any smoothing; the localization output is the pixel map resized to
image resolution with bilinear interpolation and smoothed with a
Gaussian kernel.

Distances are computed by ``scipy.spatial.distance.cdist``, whose
euclidean kernel accumulates squared differences sequentially per pair
and therefore matches a naive two-loop reference bit for bit. Blocked
evaluation over query chunks changes nothing numerically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter
from scipy.spatial.distance import cdist

from .fusion import fuse_levels
from .learner import MappedRepository, MlpParams, apply_mapping
from .manifest import DatasetManifest, SampleRecord
from .tensor_io import read_tensor_file

DEFAULT_SIGMA = 4.0
MEAN_TOPK = 10

# Query rows per cdist call; bounds the distance-matrix block to ~64 MB
# for repositories of 1e5 rows.
_QUERY_BLOCK = 64


@dataclass
class AnomalyResult:
    sample_id: str
    image_score: float
    pixel_map: np.ndarray  # (H, W) float64, feature resolution
    attention_map: np.ndarray  # (h, w) float64, image resolution


def _rows_of(repo: MappedRepository | np.ndarray) -> np.ndarray:
    rows = repo.rows if isinstance(repo, MappedRepository) else np.asarray(repo)
    if rows.ndim != 2 or rows.shape[0] < 1:
        raise ValueError("repository must hold at least one row")
    return np.asarray(rows, dtype=np.float64)


def min_distances(queries: np.ndarray, repo: MappedRepository | np.ndarray) -> np.ndarray:
    """Exact nearest-row Euclidean distance for each query row."""
    rows = _rows_of(repo)
    queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    if queries.shape[1] != rows.shape[1]:
        raise ValueError(
            f"query dim {queries.shape[1]} does not match repository dim {rows.shape[1]}"
        )
    out = np.empty(queries.shape[0])
    for start in range(0, queries.shape[0], _QUERY_BLOCK):
        block = queries[start : start + _QUERY_BLOCK]
        out[start : start + _QUERY_BLOCK] = cdist(block, rows).min(axis=1)
    return out


def nearest_distance(query: np.ndarray, repo: MappedRepository | np.ndarray) -> float:
    """Distance from one vector to its nearest repository row."""
    return float(min_distances(np.asarray(query)[None, :], repo)[0])


def pixel_score_map(
    test_features: np.ndarray,
    params: MlpParams | None,
    repo: MappedRepository,
) -> np.ndarray:
    """Nearest-repository distance at every position of a (C, H, W) test map."""
    if test_features.ndim != 3:
        raise ValueError(f"expected 3-d feature map, got shape {test_features.shape}")
    c, h, w = test_features.shape
    vectors = test_features.reshape(c, h * w).T  # row-major positions
    mapped = apply_mapping(params, vectors)
    return min_distances(mapped, repo).reshape(h, w)


def image_score(pixel_map: np.ndarray) -> float:
    """Image-level anomaly score: the maximum pre-smoothing pixel score."""
    pixel_map = np.asarray(pixel_map)
    if pixel_map.size == 0:
        raise ValueError("empty pixel map")
    return float(pixel_map.max())


def summarize_pixel_scores(pixel_map: np.ndarray, mode: str = "max") -> float:
    """Image score under the configured reduction (``max`` or ``mean-topk``)."""
    if mode == "max":
        return image_score(pixel_map)
    if mode == "mean-topk":
        flat = np.sort(np.asarray(pixel_map).ravel())
        k = min(MEAN_TOPK, flat.size)
        return float(flat[-k:].mean())
    raise ValueError(f"unknown image-score mode {mode!r}")


def _axis_coords(n_src: int, n_dst: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # Half-pixel-center sampling: src = (dst + 0.5) * n_src/n_dst - 0.5.
    src = (np.arange(n_dst, dtype=np.float64) + 0.5) * (n_src / n_dst) - 0.5
    src = np.clip(src, 0.0, n_src - 1.0)
    lo = np.floor(src).astype(np.intp)
    hi = np.minimum(lo + 1, n_src - 1)
    return lo, hi, src - lo


def upsample_bilinear(score_map: np.ndarray, target_h: int, target_w: int) -> np.ndarray:
    """Resize a 2-d map with half-pixel-center bilinear interpolation."""
    if target_h < 1 or target_w < 1:
        raise ValueError("target size must be positive")
    score_map = np.asarray(score_map, dtype=np.float64)
    if score_map.ndim != 2:
        raise ValueError(f"expected 2-d map, got shape {score_map.shape}")
    if score_map.shape == (target_h, target_w):
        return score_map.copy()
    r_lo, r_hi, r_f = _axis_coords(score_map.shape[0], target_h)
    c_lo, c_hi, c_f = _axis_coords(score_map.shape[1], target_w)
    top = score_map[np.ix_(r_lo, c_lo)] * (1 - c_f) + score_map[np.ix_(r_lo, c_hi)] * c_f
    bottom = score_map[np.ix_(r_hi, c_lo)] * (1 - c_f) + score_map[np.ix_(r_hi, c_hi)] * c_f
    return top * (1 - r_f[:, None]) + bottom * r_f[:, None]


def gaussian_smooth(score_map: np.ndarray, sigma: float = DEFAULT_SIGMA) -> np.ndarray:
    """Separable Gaussian blur, kernel radius ceil(4*sigma), replicate borders.

    The 1-d kernel is exp(-x^2 / (2 sigma^2)) normalized to sum 1, so
    constant maps pass through unchanged.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    score_map = np.asarray(score_map, dtype=np.float64)
    radius = math.ceil(4.0 * sigma)
    return gaussian_filter(score_map, sigma=sigma, mode="nearest", radius=radius)


def load_fused_features(record: SampleRecord, manifest: DatasetManifest) -> np.ndarray:
    """Load all declared levels of a record and fuse them."""
    return fuse_levels([read_tensor_file(record.tensor_paths[lv]) for lv in manifest.levels])


def score_sample(
    record: SampleRecord,
    params: MlpParams | None,
    repo: MappedRepository,
    manifest: DatasetManifest,
    sigma: float = DEFAULT_SIGMA,
    image_score_mode: str = "max",
) -> AnomalyResult:
    """Full inference for one test record: pixel map, image score, attention map."""
    features = load_fused_features(record, manifest)
    pixel_map = pixel_score_map(features, params, repo)
    score = summarize_pixel_scores(pixel_map, image_score_mode)
    attention = gaussian_smooth(
        upsample_bilinear(pixel_map, manifest.image_height, manifest.image_width), sigma
    )
    return AnomalyResult(
        sample_id=record.id,
        image_score=score,
        pixel_map=pixel_map,
        attention_map=attention,
    )
