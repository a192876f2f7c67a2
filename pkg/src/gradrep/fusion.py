"""Multi-level feature fusion.

Feature maps from different network depths have different spatial
resolutions. They are merged into one representation by resizing every
level to the largest height/width present and concatenating along the
channel axis, in the order the manifest lists the levels (shallowest
first).

Resizing uses adaptive-average semantics: output cell i on an axis of
source length n and target length m averages source cells in the bin
[floor(i*n/m), ceil((i+1)*n/m)). Downsizing degenerates to ordinary
average pooling over disjoint blocks and upsizing by an integer factor
to block replication, so constant maps stay constant either way.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np


def _bin_matrix(n_src: int, n_dst: int) -> tuple[np.ndarray, np.ndarray]:
    """0/1 bin-membership matrix (n_dst x n_src) and per-bin cell counts."""
    mat = np.zeros((n_dst, n_src), dtype=np.float64)
    counts = np.empty(n_dst, dtype=np.float64)
    for i in range(n_dst):
        start = (i * n_src) // n_dst
        end = -((-(i + 1) * n_src) // n_dst)  # ceil((i+1)*n/m)
        mat[i, start:end] = 1.0
        counts[i] = end - start
    return mat, counts


def adaptive_resize(features: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Resize a (C, H, W) map to (C, out_h, out_w) by bin averaging."""
    if features.ndim != 3 or min(features.shape) < 1:
        raise ValueError(f"expected 3-d feature map, got shape {features.shape}")
    if out_h < 1 or out_w < 1:
        raise ValueError("target size must be positive")
    c, h, w = features.shape
    if (h, w) == (out_h, out_w):
        return np.asarray(features, dtype=np.float32).copy()
    rows, row_counts = _bin_matrix(h, out_h)
    cols, col_counts = _bin_matrix(w, out_w)
    # Sum over each bin first, divide by the bin area afterwards: this keeps
    # constant maps exactly constant (n*v / n == v in floating point).
    sums = np.einsum("ij,cjk,lk->cil", rows, features.astype(np.float64), cols)
    out = sums / (row_counts[:, None] * col_counts[None, :])
    return out.astype(np.float32)


def fuse_levels(levels: Sequence[np.ndarray]) -> np.ndarray:
    """Concatenate feature maps along channels after resizing to the max resolution."""
    if len(levels) == 0:
        raise ValueError("fuse_levels needs at least one level")
    for lv in levels:
        if lv.ndim != 3 or min(lv.shape) < 1:
            raise ValueError(f"each level must be 3-d with positive dims, got {lv.shape}")
    out_h = max(lv.shape[1] for lv in levels)
    out_w = max(lv.shape[2] for lv in levels)
    resized = [adaptive_resize(lv, out_h, out_w) for lv in levels]
    return np.concatenate(resized, axis=0)
