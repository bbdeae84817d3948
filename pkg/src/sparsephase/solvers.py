"""Second-order sparse phase retrieval solver and its first-order baseline.

Each iteration identifies the next support with one hard-thresholded
amplitude-gradient step, then refines the kept coordinates with a restricted
Newton solve of the intensity objective. When every regularized factorization
attempt fails, the iteration falls back to the thresholded gradient point it
already computed. The baseline runs the thresholded gradient step alone.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Tuple

import numpy as np
import scipy.linalg

from .objectives import amplitude_gradient, intensity_gradient_restricted, intensity_hessian_block
from .sparse_ops import SupportSet, signed_distance, top_support
from .validation import as_vector

__all__ = [
    "Termination",
    "SolverConfig",
    "SparseIterate",
    "TraceEntry",
    "TrialOutcome",
    "identify_free_variables",
    "solve_spd_with_ridge",
    "newton_direction",
    "step",
    "iht_step",
    "solve",
    "iht_solve",
]

NEWTON_FALLBACK_POLICY = "regularize-then-iht"


class Termination(str, Enum):
    """Why a solve loop stopped."""

    TRUTH_TOL = "truth-tol"
    STEP_TOL = "step-tol"
    MAX_ITERS = "max-iters"
    DEGENERATE = "degenerate"


@dataclass(frozen=True)
class SolverConfig:
    """Stepsize, sparsity budget, stopping tolerances, and fallback policy.

    truth_rel_err_tol of None solves blind: only the relative step change
    and the iteration cap can stop the loop.
    """

    s: int
    eta: float = 0.95
    max_iters: int = 1000
    rel_change_tol: float = 1e-3
    truth_rel_err_tol: Optional[float] = 1e-3
    newton_fallback: str = NEWTON_FALLBACK_POLICY
    ridge_base: float = 1e-8
    ridge_growth: float = 100.0
    ridge_max_tries: int = 4

    def __post_init__(self):
        if int(self.s) < 1:
            raise ValueError(f"s must be at least 1, got {self.s}")
        if not 0.0 < self.eta < 2.0:
            raise ValueError(f"eta must lie in (0, 2), got {self.eta}")
        if int(self.max_iters) < 1:
            raise ValueError("max_iters must be at least 1")
        if self.rel_change_tol <= 0:
            raise ValueError("rel_change_tol must be positive")
        if self.truth_rel_err_tol is not None and self.truth_rel_err_tol <= 0:
            raise ValueError("truth_rel_err_tol must be positive or None")
        if self.newton_fallback != NEWTON_FALLBACK_POLICY:
            raise ValueError(f"unknown newton_fallback policy: {self.newton_fallback!r}")
        if self.ridge_base <= 0:
            raise ValueError("ridge_base must be positive")
        if self.ridge_growth <= 1:
            raise ValueError("ridge_growth must exceed 1")
        if int(self.ridge_max_tries) < 1:
            raise ValueError("ridge_max_tries must be at least 1")
        object.__setattr__(self, "s", int(self.s))
        object.__setattr__(self, "max_iters", int(self.max_iters))
        object.__setattr__(self, "ridge_max_tries", int(self.ridge_max_tries))


@dataclass(frozen=True)
class SparseIterate:
    """Iterate x with its active support; supp(x) always sits inside it."""

    x: np.ndarray
    support: SupportSet
    k: int

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if x.ndim != 1:
            raise ValueError("iterate must be a 1-d array")
        nz = np.flatnonzero(x)
        if np.setdiff1d(nz, self.support.indices).size:
            raise ValueError("iterate has nonzeros outside its support")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "k", int(self.k))


@dataclass(frozen=True)
class TraceEntry:
    """One recorded iteration.

    rel_err and support_correct are None when no ground truth is attached;
    rel_step is None for the starting point. elapsed_s counts from the start
    of the solve call.
    """

    k: int
    rel_err: Optional[float]
    rel_step: Optional[float]
    support_correct: Optional[bool]
    elapsed_s: float


@dataclass(frozen=True)
class TrialOutcome:
    """Final iterate, per-iteration trace, and how the loop stopped."""

    final: SparseIterate
    trace: Tuple[TraceEntry, ...]
    termination: Termination
    newton_fallbacks_used: int

    @property
    def iterations(self) -> int:
        return self.final.k

    def rel_errors(self):
        return [e.rel_err for e in self.trace]

    def support_flags(self):
        return [e.support_correct for e in self.trace]


def identify_free_variables(inst, iterate, cfg, Ax=None):
    """Next support: the s indices kept by one thresholded amplitude step.

    When the stepped vector has fewer than s nonzeros, zero-magnitude entries
    pad the selection deterministically, smallest index first.
    """
    g = amplitude_gradient(inst, iterate.x, Ax=Ax)
    return SupportSet(top_support(iterate.x - cfg.eta * g, cfg.s), cfg.s)


def solve_spd_with_ridge(H, rhs, cfg):
    """Cholesky solve with escalating ridge retries.

    The first attempt factors H as given; each retry adds lam * I with
    lam = ridge_base * trace(H) / p grown by ridge_growth per extra retry,
    up to ridge_max_tries retries. Returns (solution, attempts_used) or
    (None, attempts) when every factorization failed, which signals the
    caller to fall back.
    """
    H = np.asarray(H, dtype=float)
    p = H.shape[0]
    rhs = np.asarray(rhs, dtype=float)
    lam_base = cfg.ridge_base * float(np.trace(H)) / max(p, 1)
    attempts = 0
    for attempt in range(cfg.ridge_max_tries + 1):
        attempts = attempt + 1
        if attempt == 0:
            Hl = H
        else:
            lam = lam_base * cfg.ridge_growth ** (attempt - 1)
            Hl = H + lam * np.eye(p)
        try:
            factor = scipy.linalg.cho_factor(Hl, lower=True, check_finite=False)
            sol = scipy.linalg.cho_solve(factor, rhs, check_finite=False)
        except (scipy.linalg.LinAlgError, ValueError):
            continue
        if np.all(np.isfinite(sol)):
            return sol, attempts
    return None, attempts


def newton_direction(inst, iterate, next_support, cfg, Ax=None):
    """Restricted Newton direction from the reduced optimality system.

    Solves H[S, S] p = g_S - H[S, J] x_J where S is the next support and
    J holds the indices active at the iterate but dropped from S. Because
    supp(x) lies inside the current support, J captures every nonzero of x
    off S, so this reduced system matches the one posed with the full
    complement block.

    Returns (p, fallback): p is None and fallback True when every
    regularized factorization attempt failed.
    """
    x = iterate.x
    if Ax is None:
        Ax = inst.A.entries @ x
    S = next_support.indices
    J = np.setdiff1d(iterate.support.indices, S)
    g = intensity_gradient_restricted(inst, x, S, Ax=Ax)
    Hss = intensity_hessian_block(inst, x, S, S, Ax=Ax).block
    rhs = g
    if J.size:
        Hsj = intensity_hessian_block(inst, x, S, J, Ax=Ax).block
        rhs = g - Hsj @ x[J]
    p, _ = solve_spd_with_ridge(Hss, rhs, cfg)
    if p is None:
        return None, True
    return p, False


def _newton_step(inst, iterate, cfg):
    Ax = inst.A.entries @ iterate.x
    g = amplitude_gradient(inst, iterate.x, Ax=Ax)
    stepped = iterate.x - cfg.eta * g
    sel = top_support(stepped, cfg.s)
    next_support = SupportSet(sel, cfg.s)
    p, fallback = newton_direction(inst, iterate, next_support, cfg, Ax=Ax)
    x_next = np.zeros(inst.n)
    if fallback:
        # the thresholded gradient point was already computed; use it as is
        x_next[sel] = stepped[sel]
    else:
        x_next[sel] = iterate.x[sel] - p
    return SparseIterate(x_next, next_support, iterate.k + 1), fallback


def _iht_step(inst, iterate, cfg):
    Ax = inst.A.entries @ iterate.x
    g = amplitude_gradient(inst, iterate.x, Ax=Ax)
    stepped = iterate.x - cfg.eta * g
    sel = top_support(stepped, cfg.s)
    x_next = np.zeros(inst.n)
    x_next[sel] = stepped[sel]
    return SparseIterate(x_next, SupportSet(sel, cfg.s), iterate.k + 1), False


def step(inst, iterate, cfg):
    """One full solver iteration; returns the next iterate."""
    nxt, _ = _newton_step(inst, iterate, cfg)
    return nxt


def iht_step(inst, iterate, cfg):
    """One baseline iteration: thresholded amplitude-gradient descent."""
    nxt, _ = _iht_step(inst, iterate, cfg)
    return nxt


def _trace_entry(iterate, rel_step, inst, t0):
    truth = inst.truth
    if truth is not None:
        rel_err = signed_distance(iterate.x, truth.signal) / truth.norm
        support_correct = bool(np.array_equal(np.flatnonzero(iterate.x), truth.support.indices))
    else:
        rel_err = None
        support_correct = None
    return TraceEntry(iterate.k, rel_err, rel_step, support_correct, time.perf_counter() - t0)


def _run(inst, x0, cfg, stepper: Callable):
    x0 = as_vector(x0, inst.n, "x0")
    if np.count_nonzero(x0) > cfg.s:
        raise ValueError("x0 has more nonzeros than the sparsity budget")
    truth_tol = cfg.truth_rel_err_tol if inst.truth is not None else None
    t0 = time.perf_counter()
    iterate = SparseIterate(x0.copy(), SupportSet(np.flatnonzero(x0), cfg.s), 0)
    trace = [_trace_entry(iterate, None, inst, t0)]
    if truth_tol is not None and trace[0].rel_err < truth_tol:
        return TrialOutcome(iterate, tuple(trace), Termination.TRUTH_TOL, 0)

    fallbacks = 0
    termination = Termination.MAX_ITERS
    for _ in range(cfg.max_iters):
        prev = iterate
        iterate, used_fallback = stepper(inst, prev, cfg)
        fallbacks += int(used_fallback)
        prev_norm = float(np.linalg.norm(prev.x))
        rel_step = signed_distance(iterate.x, prev.x) / prev_norm if prev_norm > 0 else None
        trace.append(_trace_entry(iterate, rel_step, inst, t0))
        if truth_tol is not None and trace[-1].rel_err < truth_tol:
            termination = Termination.TRUTH_TOL
            break
        if not np.all(np.isfinite(iterate.x)):
            termination = Termination.DEGENERATE
            break
        if rel_step is None:
            termination = Termination.DEGENERATE
            break
        if rel_step < cfg.rel_change_tol:
            termination = Termination.STEP_TOL
            break
    return TrialOutcome(iterate, tuple(trace), termination, fallbacks)


def solve(inst, x0, cfg):
    """Run the second-order solver from x0 until a stopping rule fires.

    Stopping order per iteration: relative error against the attached truth
    below truth_rel_err_tol (skipped when blind), then relative step change
    below rel_change_tol, then the iteration cap. A zero-norm iterate that
    prevents the step check, or a non-finite iterate, stops the loop with a
    degenerate termination. The starting point itself is checked against the
    truth tolerance, so starting at the truth returns immediately.
    """
    return _run(inst, x0, cfg, _newton_step)


def iht_solve(inst, x0, cfg):
    """Run the first-order baseline with the same stopping rules as solve."""
    return _run(inst, x0, cfg, _iht_step)
