"""Hard thresholding, support bookkeeping, and the sign-invariant distance."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["SupportSet", "top_support", "hard_threshold", "support_of", "signed_distance"]


@dataclass(frozen=True)
class SupportSet:
    """Sorted index set with a sparsity budget.

    ``indices`` is strictly increasing and never longer than ``capacity``.
    """

    indices: np.ndarray
    capacity: int

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64).copy()
        if idx.ndim != 1:
            raise ValueError("support indices must be 1-d")
        if idx.size:
            if idx.min() < 0:
                raise ValueError("support indices must be nonnegative")
            if np.any(np.diff(idx) <= 0):
                raise ValueError("support indices must be strictly increasing")
        if int(self.capacity) < idx.size:
            raise ValueError(f"{idx.size} indices exceed capacity {self.capacity}")
        idx.flags.writeable = False
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "capacity", int(self.capacity))

    def __len__(self):
        return int(self.indices.size)

    def __iter__(self):
        return iter(self.indices.tolist())

    def __contains__(self, j):
        return bool(np.any(self.indices == j))

    def to_set(self):
        return set(self.indices.tolist())

    def difference(self, other: "SupportSet") -> np.ndarray:
        return np.setdiff1d(self.indices, other.indices)


def top_support(w, s):
    """Indices of the s largest-magnitude entries of w, sorted ascending.

    Ties break toward the smallest index (stable sort on negated magnitudes),
    so the selection is deterministic even across zero-magnitude entries.
    Always returns exactly s indices.
    """
    w = np.asarray(w, dtype=float)
    if w.ndim != 1:
        raise ValueError("w must be a 1-d array")
    s = int(s)
    if not 1 <= s <= w.size:
        raise ValueError(f"s must satisfy 1 <= s <= {w.size}, got {s}")
    order = np.argsort(-np.abs(w), kind="stable")
    return np.sort(order[:s])


def hard_threshold(w, s):
    """Keep the s largest-magnitude entries of w and zero out the rest.

    Among all vectors with at most s nonzeros this minimizes the distance
    to w; ties follow the top_support rule.
    """
    w = np.asarray(w, dtype=float)
    keep = top_support(w, s)
    out = np.zeros_like(w)
    out[keep] = w[keep]
    return out


def support_of(x, capacity=None):
    """Exact nonzero support of x as a SupportSet."""
    x = np.asarray(x, dtype=float)
    idx = np.flatnonzero(x)
    if capacity is None:
        capacity = idx.size
    return SupportSet(idx, capacity)


def signed_distance(x, t):
    """min(||x - t||, ||x + t||), the Euclidean distance up to global sign."""
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    if x.shape != t.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {t.shape}")
    return float(min(np.linalg.norm(x - t), np.linalg.norm(x + t)))
