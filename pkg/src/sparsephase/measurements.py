"""Gaussian measurement generation for real sparse phase retrieval.

A problem instance bundles a sensing matrix A with rows a_i, intensities
y_i = (a_i . x)^2 plus optional additive Gaussian noise, amplitudes
z_i = sqrt(max(y_i, 0)), and the ground truth that generated them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .exceptions import DegenerateInputError
from .sparse_ops import SupportSet
from .validation import check_sparsity

__all__ = [
    "SensingMatrix",
    "GroundTruth",
    "ProblemInstance",
    "MATRIX_STREAM",
    "SIGNAL_STREAM",
    "NOISE_STREAM",
    "stream_rng",
    "generate_gaussian_matrix",
    "generate_sparse_signal",
    "measure",
    "make_instance",
]

# Fixed role tags keep the matrix, signal, and noise streams disjoint under a
# shared master seed.
MATRIX_STREAM = 1
SIGNAL_STREAM = 2
NOISE_STREAM = 3


def stream_rng(master_seed, role, trial=0):
    """Independent generator for one role stream under a master seed.

    Streams are derived from (master_seed, role, trial), so each trial's data
    is fixed regardless of how many other trials run or in which order.
    """
    entropy = (int(master_seed), int(role), int(trial))
    return np.random.default_rng(np.random.SeedSequence(entropy))


def _as_rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


@dataclass(frozen=True)
class SensingMatrix:
    """Dense real sensing matrix whose rows are the measurement vectors."""

    entries: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=float)
        if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
            raise ValueError(f"entries must be a nonempty 2-d array, got shape {a.shape}")
        object.__setattr__(self, "entries", a)

    @property
    def m(self) -> int:
        return self.entries.shape[0]

    @property
    def n(self) -> int:
        return self.entries.shape[1]


@dataclass(frozen=True)
class GroundTruth:
    """Sparse target signal together with its declared sparsity budget s."""

    signal: np.ndarray
    s: int

    def __post_init__(self):
        x = np.asarray(self.signal, dtype=float)
        if x.ndim != 1:
            raise ValueError("signal must be a 1-d array")
        nnz = int(np.count_nonzero(x))
        if nnz > int(self.s):
            raise ValueError(f"signal has {nnz} nonzeros, more than s={self.s}")
        object.__setattr__(self, "signal", x)
        object.__setattr__(self, "s", int(self.s))

    @property
    def support(self) -> SupportSet:
        """Indices of the nonzero entries."""
        return SupportSet(np.flatnonzero(self.signal), self.s)

    @property
    def x_min(self) -> float:
        """Smallest nonzero magnitude."""
        nz = np.abs(self.signal[self.signal != 0])
        if nz.size == 0:
            raise DegenerateInputError("all-zero signal has no smallest nonzero magnitude")
        return float(nz.min())

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.signal))


@dataclass(frozen=True)
class ProblemInstance:
    """One retrieval problem: matrix, intensities, amplitudes, optional truth."""

    A: SensingMatrix
    y: np.ndarray
    z: np.ndarray
    sigma: float = 0.0
    truth: Optional[GroundTruth] = None

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        z = np.asarray(self.z, dtype=float)
        if y.shape != (self.A.m,):
            raise ValueError(f"y must have length m={self.A.m}, got shape {y.shape}")
        if z.shape != y.shape:
            raise ValueError("z must match y in length")
        if np.any(z < 0):
            raise ValueError("amplitudes z must be nonnegative")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if self.truth is not None:
            if self.truth.signal.shape[0] != self.A.n:
                raise ValueError("truth length does not match the matrix columns")
            if not np.any(self.truth.signal):
                raise DegenerateInputError("all-zero ground truth is not usable")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "sigma", float(self.sigma))

    @property
    def m(self) -> int:
        return self.A.m

    @property
    def n(self) -> int:
        return self.A.n


def generate_gaussian_matrix(m, n, seed):
    """i.i.d. standard normal sensing matrix, reproducible from the seed."""
    m, n = int(m), int(n)
    if m < 1 or n < 1:
        raise ValueError(f"matrix dimensions must be positive, got m={m}, n={n}")
    return SensingMatrix(_as_rng(seed).standard_normal((m, n)))


def generate_sparse_signal(n, s, seed):
    """s-sparse signal: uniform random support, standard normal values.

    Exactly s entries are nonzero; an exact-zero draw would silently shrink
    the support, so such values are redrawn from the same stream.
    """
    n, s = int(n), int(s)
    check_sparsity(s, n)
    rng = _as_rng(seed)
    support = np.sort(rng.choice(n, size=s, replace=False))
    values = rng.standard_normal(s)
    while np.any(values == 0.0):
        zero = values == 0.0
        values[zero] = rng.standard_normal(int(zero.sum()))
    x = np.zeros(n)
    x[support] = values
    return GroundTruth(x, s)


def measure(A, truth, sigma=0.0, seed=None):
    """Quadratic measurements of the truth under A with optional Gaussian noise.

    Parameters
    ----------
    A : SensingMatrix
    truth : GroundTruth
        Must be nonzero; an all-zero target is rejected.
    sigma : float
        Additive noise level; y_i = (a_i . x)^2 + sigma * eps_i with eps_i
        standard normal drawn from ``seed``.
    seed : int, Generator, or None
        Noise stream; unused when sigma == 0.

    Returns
    -------
    ProblemInstance
        Holds y, the clamped amplitudes z_i = sqrt(max(y_i, 0)), sigma, and
        the truth. Clamping guards against noise-driven negative intensities.
    """
    if truth.signal.shape[0] != A.n:
        raise ValueError(f"truth length {truth.signal.shape[0]} does not match n={A.n}")
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    if not np.any(truth.signal):
        raise DegenerateInputError("refusing to measure an all-zero ground truth")
    q = A.entries @ truth.signal
    y = q * q
    if sigma > 0:
        y = y + sigma * _as_rng(seed).standard_normal(A.m)
    z = np.sqrt(np.clip(y, 0.0, None))
    return ProblemInstance(A, y, z, float(sigma), truth)


def make_instance(n, m, s, sigma=0.0, master_seed=0, trial=0):
    """Full instance from one master seed with isolated role streams."""
    A = generate_gaussian_matrix(m, n, stream_rng(master_seed, MATRIX_STREAM, trial))
    truth = generate_sparse_signal(n, s, stream_rng(master_seed, SIGNAL_STREAM, trial))
    return measure(A, truth, sigma, stream_rng(master_seed, NOISE_STREAM, trial))
