"""Recovery error, success rule, PSNR, and convergence-rate diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .measurements import GroundTruth
from .sparse_ops import signed_distance

__all__ = ["SUCCESS_THRESHOLD", "relative_error", "is_success", "psnr", "RateDiagnostics", "rate_diagnostics"]

# strict success rule shared by every experiment
SUCCESS_THRESHOLD = 1e-3


def relative_error(x, truth):
    """Sign-invariant relative error of x against the ground truth."""
    t = truth.signal if isinstance(truth, GroundTruth) else np.asarray(truth, dtype=float)
    nt = float(np.linalg.norm(t))
    if nt == 0.0:
        raise ValueError("ground truth norm is zero")
    return signed_distance(x, t) / nt


def is_success(rel_err) -> bool:
    """Strict success rule: relative error below 1e-3. NaN is a failure."""
    return bool(rel_err < SUCCESS_THRESHOLD)


def psnr(estimate, truth_vector):
    """Peak signal-to-noise ratio in dB with peak V = max(truth) - min(truth).

    An exact match (zero MSE) returns +inf; a constant truth with nonzero
    MSE returns -inf.
    """
    t = np.asarray(truth_vector, dtype=float)
    e = np.asarray(estimate, dtype=float)
    if e.shape != t.shape:
        raise ValueError(f"shape mismatch: {e.shape} vs {t.shape}")
    mse = float(np.mean((e - t) ** 2))
    if mse == 0.0:
        return math.inf
    v = float(np.max(t) - np.min(t))
    if v == 0.0:
        return -math.inf
    return 10.0 * math.log10(v * v / mse)


@dataclass(frozen=True)
class RateDiagnostics:
    """Linear-phase fit and quadratic-tail summary of an error trace.

    The fit fields are None when fewer than three trace points fall in the
    fitting band; the tail fields are None when no consecutive pair enters
    the tail.
    """

    linear_fit_slope: Optional[float]
    linear_fit_r2: Optional[float]
    quadratic_tail_constant: Optional[float]
    tail_start_iter: Optional[int]


def rate_diagnostics(errors, support_matches=None, fit_upper=1e-1, fit_lower=1e-3, tail_threshold=1e-2):
    """Summarize a per-iteration error trace.

    The linear phase is a least-squares fit of log(e_k) against k over points
    with fit_lower < e_k <= fit_upper, requiring at least three such points.
    The quadratic tail constant is max e_{k+1} / e_k^2 over consecutive pairs
    whose leading error is positive and at most tail_threshold; when support
    flags are given, both ends of a pair must match the true support.
    tail_start_iter is the first index entering the tail.
    """
    e = np.array([math.nan if v is None else float(v) for v in errors], dtype=float)
    if support_matches is None:
        matched = np.ones(e.size, dtype=bool)
    else:
        matched = np.array([bool(f) for f in support_matches])
        if matched.size != e.size:
            raise ValueError("support_matches must align with errors")

    slope = r2 = None
    band = np.isfinite(e) & (e > fit_lower) & (e <= fit_upper)
    if int(band.sum()) >= 3:
        ks = np.flatnonzero(band).astype(float)
        ys = np.log(e[band])
        coef = np.polyfit(ks, ys, 1)
        pred = np.polyval(coef, ks)
        ss_res = float(np.sum((ys - pred) ** 2))
        ss_tot = float(np.sum((ys - np.mean(ys)) ** 2))
        slope = float(coef[0])
        r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot

    const = None
    tail_start = None
    for i in range(e.size - 1):
        if not (np.isfinite(e[i]) and np.isfinite(e[i + 1])):
            continue
        if e[i] <= 0.0 or e[i] > tail_threshold:
            continue
        if not (matched[i] and matched[i + 1]):
            continue
        ratio = e[i + 1] / (e[i] * e[i])
        const = ratio if const is None else max(const, ratio)
        if tail_start is None:
            tail_start = i
    return RateDiagnostics(slope, r2, const, tail_start)
