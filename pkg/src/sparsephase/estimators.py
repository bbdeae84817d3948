"""Scikit-learn style estimators wrapping the functional solver core.

The sensing matrix plays the role of the design matrix X and the measured
intensities play the role of y, so phase retrieval fits the familiar
``fit(X, y)`` shape with the recovered signal exposed as ``coef_``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .measurements import GroundTruth, ProblemInstance, SensingMatrix
from .solvers import SolverConfig, iht_solve, solve
from .spectral import spectral_init
from .validation import as_vector

__all__ = ["NewtonRetriever", "IHTRetriever"]


class _BaseRetriever(RegressorMixin, BaseEstimator):
    """Shared plumbing: build the instance, initialize, run a solver.

    Parameters
    ----------
    sparsity : int
        Number of nonzeros to recover.
    eta : float
        Stepsize of the support-identification (and baseline) gradient step.
    max_iters : int
        Iteration cap.
    rel_change_tol : float
        Relative step-change stopping tolerance.
    truth_rel_err_tol : float or None
        Relative-error stopping tolerance, used only when fit receives a
        ground truth; None always solves blind.
    init : "spectral" or "zero"
        Starting point construction when fit is not given x0.
    seed : int
        Stream for the power-iteration fallback start.

    Attributes
    ----------
    coef_ : recovered signal (n,)
    support_ : sorted indices of the recovered nonzeros
    n_iter_ : iterations executed
    termination_ : which stopping rule fired
    outcome_ : full TrialOutcome with the per-iteration trace
    init_report_ : InitReport when spectral initialization ran, else None
    """

    def __init__(self, sparsity=10, eta=0.95, max_iters=1000, rel_change_tol=1e-3,
                 truth_rel_err_tol=1e-3, init="spectral", seed=0):
        self.sparsity = sparsity
        self.eta = eta
        self.max_iters = max_iters
        self.rel_change_tol = rel_change_tol
        self.truth_rel_err_tol = truth_rel_err_tol
        self.init = init
        self.seed = seed

    def _run_solver(self, inst, x0, cfg):
        raise NotImplementedError

    def fit(self, X, y, truth=None, x0=None):
        """Recover a sparse signal from intensities y under sensing matrix X.

        truth, when given, attaches a ground truth so the error trace and the
        truth-tolerance stopping rule are available. x0 overrides the
        initialization.
        """
        X = check_array(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        y = as_vector(y, X.shape[0], "y")
        gt = None
        if truth is not None:
            t = as_vector(truth, X.shape[1], "truth")
            gt = GroundTruth(t, max(int(self.sparsity), int(np.count_nonzero(t))))
        inst = ProblemInstance(SensingMatrix(X), y, np.sqrt(np.clip(y, 0.0, None)), 0.0, gt)
        cfg = SolverConfig(
            s=int(self.sparsity),
            eta=self.eta,
            max_iters=self.max_iters,
            rel_change_tol=self.rel_change_tol,
            truth_rel_err_tol=self.truth_rel_err_tol,
        )
        self.init_report_ = None
        if x0 is not None:
            x0 = as_vector(x0, X.shape[1], "x0")
        elif self.init == "spectral":
            self.init_report_ = spectral_init(inst, cfg.s, seed=self.seed)
            x0 = self.init_report_.x0
        elif self.init == "zero":
            x0 = np.zeros(X.shape[1])
        else:
            raise ValueError(f"unknown init {self.init!r}; expected 'spectral' or 'zero'")
        outcome = self._run_solver(inst, x0, cfg)
        self.coef_ = outcome.final.x
        self.support_ = np.flatnonzero(outcome.final.x)
        self.n_iter_ = outcome.final.k
        self.termination_ = outcome.termination.value
        self.outcome_ = outcome
        return self

    def predict(self, X):
        """Predicted intensities (X w)^2 for the recovered coefficients."""
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=np.float64)
        q = X @ self.coef_
        return q * q


class NewtonRetriever(_BaseRetriever):
    """Sparse phase retrieval by hard-threshold support identification and
    restricted Newton refinement, spectrally initialized by default."""

    def _run_solver(self, inst, x0, cfg):
        return solve(inst, x0, cfg)


class IHTRetriever(_BaseRetriever):
    """First-order baseline: iterative hard thresholding on the amplitude loss."""

    def _run_solver(self, inst, x0, cfg):
        return iht_solve(inst, x0, cfg)
