"""Spectral initialization restricted to an estimated support."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .exceptions import DegenerateInputError, PowerIterationError
from .sparse_ops import SupportSet, top_support
from .validation import check_sparsity

__all__ = ["InitReport", "PowerIterationResult", "score_support", "leading_eigenvector", "spectral_init"]


@dataclass(frozen=True)
class InitReport:
    """Initial iterate with the support estimate and power-iteration stats."""

    x0: np.ndarray
    est_support: SupportSet
    power_iters: int
    eig_residual: float


class PowerIterationResult(NamedTuple):
    vector: np.ndarray
    residual: float
    iterations: int


def _diagonal_scores(inst):
    # einsum fuses the elementwise square with the reduction, so no m-by-n
    # temporary is materialized
    return np.einsum("ij,ij,i->j", inst.A.entries, inst.A.entries, inst.y) / inst.m


def score_support(inst, s):
    """Top-s indices of the diagonal scores (1/m) sum_i y_i a_ij^2.

    Ties break toward the smallest index, matching hard thresholding.
    """
    check_sparsity(s, inst.n)
    return SupportSet(top_support(_diagonal_scores(inst), s), int(s))


def leading_eigenvector(M, tol=1e-8, max_iters=1000, v0=None, seed=0):
    """Power iteration for the most-positive eigenpair of a symmetric matrix.

    The iteration first runs on M itself, which converges to the eigenvalue
    of largest magnitude. If that eigenvalue turns out negative, the
    iteration restarts on M + |lam| I, whose dominant eigenpair is the
    algebraically largest one of M; the residual is always measured on the
    unshifted matrix. An unconditional shift would also work but can slow
    convergence by orders of magnitude on positive semidefinite input, where
    no shift is needed at all. Convergence is declared when
    ||M v - (v^T M v) v|| falls below tol times a lower bound on ||M||,
    which is at least as strict as tol * ||M||.

    Parameters
    ----------
    M : (p, p) symmetric array
    tol : float
        Relative eigen-residual target.
    max_iters : int
        Total iteration budget across both phases; exceeding it raises
        PowerIterationError carrying the last residual.
    v0 : array or None
        Start vector; None draws a seeded random start.
    seed : int
        Stream for the random start, also used for deterministic restarts.

    Returns
    -------
    PowerIterationResult
        Fields vector (unit norm), residual, iterations.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"M must be square, got shape {M.shape}")
    scale = float(np.max(np.abs(M))) if M.size else 0.0
    if not np.allclose(M, M.T, rtol=0.0, atol=1e-12 * max(scale, 1.0)):
        raise ValueError("M must be symmetric")
    p = M.shape[0]
    if p == 1:
        return PowerIterationResult(np.ones(1), 0.0, 0)

    if v0 is None:
        v = np.random.default_rng(seed).standard_normal(p)
    else:
        v = np.asarray(v0, dtype=float).copy()
        if v.shape != (p,):
            raise ValueError(f"v0 must have shape ({p},), got {v.shape}")
    nv = np.linalg.norm(v)
    if nv == 0.0:
        v = np.random.default_rng(seed).standard_normal(p)
        nv = np.linalg.norm(v)
    v = v / nv

    # lower bound on the spectral norm, used as the residual denominator
    norm_floor = max(float(np.linalg.norm(M, "fro")) / np.sqrt(p), np.finfo(float).tiny)

    shift = 0.0
    residual = np.inf
    for k in range(max_iters + 1):
        Mv = M @ v
        lam = float(v @ Mv)
        residual = float(np.linalg.norm(Mv - lam * v)) / max(abs(lam), norm_floor)
        if residual <= tol:
            if lam >= 0.0 or shift > 0.0:
                return PowerIterationResult(v, residual, k)
            # converged onto a dominant negative eigenvalue; lift the
            # spectrum so the most-positive one dominates and keep going
            shift = abs(lam)
            v = np.random.default_rng(seed + k + 1).standard_normal(p)
            v = v / np.linalg.norm(v)
            continue
        w = Mv + shift * v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            # operator annihilated the iterate; restart deterministically
            v = np.random.default_rng(seed + k + 1).standard_normal(p)
            v = v / np.linalg.norm(v)
            continue
        v = w / nw
    raise PowerIterationError(
        f"power iteration missed tol={tol:g} within {max_iters} iterations "
        f"(last residual {residual:.3e})",
        residual,
    )


def spectral_init(inst, s, tol=1e-8, max_iters=1000, seed=0):
    """Initial iterate from the restricted spectral method.

    The support estimate comes from the top-s diagonal scores, the direction
    from the leading eigenvector of the second-moment matrix restricted to
    that estimate, and the scale from the mean intensity, so that
    ||x0||^2 = mean(y). The power iteration starts from the normalized score
    vector on the estimated support and falls back to a seeded random start
    if that vector is zero.
    """
    check_sparsity(s, inst.n)
    total = float(np.sum(inst.y))
    if total <= 0.0:
        raise DegenerateInputError("sum of intensities must be positive for spectral scaling")
    scores = _diagonal_scores(inst)
    sel = top_support(scores, s)
    As = inst.A.entries[:, sel]
    M = (As * inst.y[:, None]).T @ As / inst.m
    M = (M + M.T) / 2.0
    v0 = scores[sel]
    nv0 = np.linalg.norm(v0)
    vec, residual, iters = leading_eigenvector(
        M, tol=tol, max_iters=max_iters, v0=v0 / nv0 if nv0 > 0 else None, seed=seed
    )
    x0 = np.zeros(inst.n)
    x0[sel] = vec
    x0 *= np.sqrt(total / inst.m)
    return InitReport(x0, SupportSet(sel, int(s)), iters, residual)
