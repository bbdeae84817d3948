"""Intensity and amplitude objectives with restricted derivatives.

Every evaluation computes the forward product A @ x once. Callers holding
several evaluations at the same iterate can pass a precomputed ``Ax``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sparse_ops import SupportSet
from .validation import as_vector, check_indices

__all__ = [
    "RestrictedHessian",
    "intensity_loss",
    "amplitude_loss",
    "amplitude_gradient",
    "intensity_gradient_restricted",
    "intensity_hessian_block",
]


@dataclass(frozen=True)
class RestrictedHessian:
    """Dense block of the intensity Hessian on a row and a column support."""

    row_support: np.ndarray
    col_support: np.ndarray
    block: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.row_support, dtype=np.int64)
        c = np.asarray(self.col_support, dtype=np.int64)
        b = np.asarray(self.block, dtype=float)
        if b.shape != (r.size, c.size):
            raise ValueError(f"block shape {b.shape} does not match supports ({r.size}, {c.size})")
        object.__setattr__(self, "row_support", r)
        object.__setattr__(self, "col_support", c)
        object.__setattr__(self, "block", b)


def _forward(inst, x, Ax):
    x = as_vector(x, inst.n, "x")
    if Ax is None:
        Ax = inst.A.entries @ x
    return x, Ax


def _indices(support, n):
    idx = support.indices if isinstance(support, SupportSet) else support
    return check_indices(idx, n)


def intensity_loss(inst, x, Ax=None):
    """Quartic intensity objective (1/4m) sum_i ((a_i . x)^2 - y_i)^2."""
    _, q = _forward(inst, x, Ax)
    r = q * q - inst.y
    return float(r @ r) / (4.0 * inst.m)


def amplitude_loss(inst, x, Ax=None):
    """Amplitude objective (1/2m) sum_i (|a_i . x| - z_i)^2."""
    _, q = _forward(inst, x, Ax)
    r = np.abs(q) - inst.z
    return float(r @ r) / (2.0 * inst.m)


def amplitude_gradient(inst, x, Ax=None):
    """Generalized amplitude gradient (1/m) A^T (A x - z * sgn(A x)).

    Measurements with a_i . x == 0 contribute nothing: sgn(0) is taken as 0.
    """
    _, q = _forward(inst, x, Ax)
    return inst.A.entries.T @ (q - inst.z * np.sign(q)) / inst.m


def intensity_gradient_restricted(inst, x, support, Ax=None):
    """Intensity gradient restricted to a support.

    Entry for j in the support is (1/m) sum_i ((a_i . x)^2 - y_i)(a_i . x) a_ij.
    """
    _, q = _forward(inst, x, Ax)
    idx = _indices(support, inst.n)
    w = (q * q - inst.y) * q
    return inst.A.entries[:, idx].T @ w / inst.m


def intensity_hessian_block(inst, x, rows, cols, Ax=None):
    """Intensity Hessian block on a row support and a column support.

    block[p, q] = (1/m) sum_i (3 (a_i . x)^2 - y_i) a_i[rows_p] a_i[cols_q].
    The diagonal block (rows == cols) is symmetrized to remove rounding
    asymmetry, keeping it safe for a Cholesky factorization.
    """
    _, q = _forward(inst, x, Ax)
    r = _indices(rows, inst.n)
    c = _indices(cols, inst.n)
    w = 3.0 * q * q - inst.y
    Ar = inst.A.entries[:, r]
    same = np.array_equal(r, c)
    Ac = Ar if same else inst.A.entries[:, c]
    block = (Ar * w[:, None]).T @ Ac / inst.m
    if same:
        block = (block + block.T) / 2.0
    return RestrictedHessian(r, c, block)
