"""Hard and partial hard thresholding.

Ties in magnitude are broken towards the lower index everywhere, so every
selection is reproducible bit for bit.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BadArguments
from .linalg import as_support

__all__ = ["ThresholdResult", "top_indices", "hard_threshold", "partial_hard_threshold"]


@dataclass
class ThresholdResult:
    y: np.ndarray
    support: np.ndarray
    found: np.ndarray  # support \ I
    lost: np.ndarray   # I \ support


def top_indices(magnitudes: np.ndarray, count: int) -> np.ndarray:
    """Positions of the `count` largest entries, ascending; lower position wins ties.

    Uses a linear-time partition to find the cut value, so the cost is O(n)
    rather than a full sort.
    """
    n = magnitudes.shape[0]
    if count <= 0:
        return np.empty(0, dtype=np.int64)
    if count >= n:
        return np.arange(n, dtype=np.int64)
    cut = np.partition(magnitudes, n - count)[n - count]
    above = np.flatnonzero(magnitudes > cut)
    tied = np.flatnonzero(magnitudes == cut)
    chosen = np.concatenate([above, tied[:count - above.size]])
    chosen.sort()
    return chosen


def hard_threshold(z, k: int) -> ThresholdResult:
    """Keep the `k` largest-magnitude entries of `z` and zero the rest."""
    z = np.asarray(z, dtype=np.float64)
    n = z.shape[0]
    if k < 0 or k > n:
        raise BadArguments(f"k = {k} must lie in [0, {n}]")
    keep = top_indices(np.abs(z), k)
    y = np.zeros(n)
    y[keep] = z[keep]
    return ThresholdResult(y=y, support=keep, found=keep.copy(), lost=np.empty(0, dtype=np.int64))


def partial_hard_threshold(z, I, l: int, k: int) -> ThresholdResult:
    """Closest k-sparse vector to `z` that brings in at most `l` indices outside `I`.

    Computed in three steps: take the `l` largest ``|z_j|`` with ``j`` outside
    `I`, join them to `I`, then hard threshold `z` restricted to that union.
    """
    z = np.asarray(z, dtype=np.float64)
    n = z.shape[0]
    I = as_support(I, n)
    if I.size != k:
        raise BadArguments(f"|I| = {I.size} but k = {k}")
    if l < 1 or l > k:
        raise BadArguments(f"l = {l} must lie in [1, k = {k}]")
    mag = np.abs(z)
    outside = np.ones(n, dtype=bool)
    outside[I] = False
    candidates = np.flatnonzero(outside)
    top = candidates[top_indices(mag[candidates], l)]
    J = np.union1d(I, top)
    keep = J[top_indices(mag[J], k)]
    y = np.zeros(n)
    y[keep] = z[keep]
    return ThresholdResult(
        y=y,
        support=keep,
        found=np.setdiff1d(keep, I, assume_unique=True),
        lost=np.setdiff1d(I, keep, assume_unique=True),
    )
