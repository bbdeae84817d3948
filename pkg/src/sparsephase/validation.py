"""Argument-checking helpers used across the public API."""

import numpy as np


def as_vector(x, n=None, name="x"):
    """Coerce to a float 1-d array, optionally checking its length."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError(f"{name} must be a 1-d array, got shape {x.shape}")
    if n is not None and x.shape[0] != n:
        raise ValueError(f"{name} must have length {n}, got {x.shape[0]}")
    return x


def as_matrix(a, name="A"):
    """Coerce to a float 2-d array."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise ValueError(f"{name} must be a 2-d array, got shape {a.shape}")
    return a


def check_sparsity(s, n):
    """Require 1 <= s <= n."""
    if not 1 <= int(s) <= int(n):
        raise ValueError(f"sparsity must satisfy 1 <= s <= {n}, got {s}")


def check_indices(indices, n, name="support"):
    """Coerce indices to int64 and require them to lie in [0, n)."""
    idx = np.asarray(indices, dtype=np.int64)
    if idx.ndim != 1:
        raise ValueError(f"{name} indices must be 1-d")
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise ValueError(f"{name} indices must lie in [0, {n})")
    return idx
