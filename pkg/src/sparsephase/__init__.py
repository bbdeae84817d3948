"""Sparse phase retrieval from quadratic Gaussian measurements.

A second-order solver that identifies the working support with one
hard-thresholded amplitude-gradient step and refines it with a restricted
Newton solve, together with a sparse spectral initializer, a first-order
baseline, evaluation metrics, scikit-learn style estimators, and a
reproducible experiment harness.
"""

from .estimators import IHTRetriever, NewtonRetriever
from .exceptions import ConfigError, DegenerateInputError, PowerIterationError
from .experiments import ExperimentGrid, run, run_single_trial
from .measurements import (
    GroundTruth,
    ProblemInstance,
    SensingMatrix,
    generate_gaussian_matrix,
    generate_sparse_signal,
    make_instance,
    measure,
    stream_rng,
)
from .metrics import SUCCESS_THRESHOLD, RateDiagnostics, is_success, psnr, rate_diagnostics, relative_error
from .objectives import (
    RestrictedHessian,
    amplitude_gradient,
    amplitude_loss,
    intensity_gradient_restricted,
    intensity_hessian_block,
    intensity_loss,
)
from .solvers import (
    SolverConfig,
    SparseIterate,
    Termination,
    TraceEntry,
    TrialOutcome,
    identify_free_variables,
    iht_solve,
    iht_step,
    newton_direction,
    solve,
    solve_spd_with_ridge,
    step,
)
from .sparse_ops import SupportSet, hard_threshold, signed_distance, support_of, top_support
from .spectral import InitReport, leading_eigenvector, score_support, spectral_init

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "ConfigError",
    "DegenerateInputError",
    "PowerIterationError",
    "SensingMatrix",
    "GroundTruth",
    "ProblemInstance",
    "stream_rng",
    "generate_gaussian_matrix",
    "generate_sparse_signal",
    "measure",
    "make_instance",
    "RestrictedHessian",
    "intensity_loss",
    "amplitude_loss",
    "amplitude_gradient",
    "intensity_gradient_restricted",
    "intensity_hessian_block",
    "SupportSet",
    "top_support",
    "hard_threshold",
    "support_of",
    "signed_distance",
    "InitReport",
    "score_support",
    "leading_eigenvector",
    "spectral_init",
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
    "SUCCESS_THRESHOLD",
    "relative_error",
    "is_success",
    "psnr",
    "RateDiagnostics",
    "rate_diagnostics",
    "NewtonRetriever",
    "IHTRetriever",
    "ExperimentGrid",
    "run",
    "run_single_trial",
]
