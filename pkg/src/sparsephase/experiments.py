"""Reproducible experiment harness writing one CSV plus a metadata sidecar.

Five experiment kinds share a common grid description and per-trial seeding:
convergence traces, phase-transition success rates over m, relative-error
sweeps over SNR, timing summaries, and a single traced solve. Trials are
independent tasks, so they can run on a thread pool; results are written in
a fixed order either way, and every row carries the parameters and master
seed needed to reproduce it in isolation.
"""

from __future__ import annotations

import csv
import datetime
import itertools
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import asdict, dataclass
from typing import NamedTuple, Optional

import numpy as np
import scipy

from .exceptions import ConfigError, DegenerateInputError, PowerIterationError
from .measurements import (
    MATRIX_STREAM,
    NOISE_STREAM,
    SIGNAL_STREAM,
    generate_gaussian_matrix,
    generate_sparse_signal,
    make_instance,
    measure,
    stream_rng,
)
from .metrics import SUCCESS_THRESHOLD, is_success
from .solvers import (
    SolverConfig,
    SparseIterate,
    Termination,
    TraceEntry,
    TrialOutcome,
    iht_solve,
    solve,
)
from .sparse_ops import SupportSet
from .spectral import spectral_init

__all__ = [
    "KINDS",
    "ALGORITHMS",
    "ExperimentGrid",
    "TrialResult",
    "run_single_trial",
    "run_noise_trial",
    "run_convergence",
    "run_phase_transition",
    "run_noise_sweep",
    "run_timing",
    "run",
]

KINDS = ("convergence", "phase-transition", "noise-sweep", "timing", "single-solve")
ALGORITHMS = ("proposed", "iht")


@dataclass(frozen=True)
class ExperimentGrid:
    """Cartesian experiment description with per-trial seeding."""

    kind: str
    n_values: tuple = ()
    s_values: tuple = ()
    m_values: tuple = ()
    m_ratios: tuple = ()
    sigma_values: tuple = (0.0,)
    snr_db_values: tuple = ()
    algorithms: tuple = ("proposed",)
    trials: int = 1
    master_seed: int = 0
    eta: float = 0.95
    max_iters: int = 1000
    threads: int = 1
    out: str = "results.csv"

    def __post_init__(self):
        for name in ("n_values", "s_values", "m_values", "m_ratios",
                     "sigma_values", "snr_db_values", "algorithms"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if self.kind not in KINDS:
            raise ConfigError(f"experiment must be one of {KINDS}, got {self.kind!r}")
        if not self.algorithms:
            raise ConfigError("algo list must not be empty")
        for a in self.algorithms:
            if a not in ALGORITHMS:
                raise ConfigError(f"algo must be one of {ALGORITHMS}, got {a!r}")
        if not self.n_values:
            raise ConfigError("n is required and must not be empty")
        if not self.s_values:
            raise ConfigError("s is required and must not be empty")
        if self.kind == "timing":
            if not self.m_values and not self.m_ratios:
                raise ConfigError("timing needs m or m-ratio")
        elif not self.m_values:
            raise ConfigError("m is required and must not be empty")
        if self.kind == "noise-sweep" and not self.snr_db_values:
            raise ConfigError("noise-sweep needs snr-db values")
        if any(int(v) < 1 for v in self.n_values):
            raise ConfigError("n values must be positive")
        if any(int(v) < 1 for v in self.m_values):
            raise ConfigError("m values must be positive")
        if any(int(v) < 1 for v in self.s_values):
            raise ConfigError("s values must be positive")
        if any(float(r) <= 0 for r in self.m_ratios):
            raise ConfigError("m-ratio values must be positive")
        if any(float(v) < 0 for v in self.sigma_values):
            raise ConfigError("sigma values must be nonnegative")
        if int(self.trials) < 1:
            raise ConfigError("trials must be at least 1")
        if not 0.0 < float(self.eta) < 2.0:
            raise ConfigError("eta must lie in (0, 2)")
        if int(self.max_iters) < 1:
            raise ConfigError("max-iters must be at least 1")
        if int(self.threads) < 1:
            raise ConfigError("threads must be at least 1")
        if self.kind == "single-solve":
            lens = (len(self.n_values), len(self.m_values), len(self.s_values),
                    len(self.sigma_values), len(self.algorithms))
            if lens != (1, 1, 1, 1, 1) or int(self.trials) != 1:
                raise ConfigError("single-solve takes exactly one n, m, s, sigma, algo, and one trial")


class TrialResult(NamedTuple):
    outcome: TrialOutcome
    init_report: object
    init_s: float
    solve_s: float


def _degenerate_outcome(inst, cfg):
    # a failed initialization folds into the record instead of aborting a sweep
    it = SparseIterate(np.zeros(inst.n), SupportSet(np.array([], dtype=np.int64), cfg.s), 0)
    if inst.truth is not None:
        entry = TraceEntry(0, 1.0, None, False, 0.0)
    else:
        entry = TraceEntry(0, None, None, None, 0.0)
    return TrialOutcome(it, (entry,), Termination.DEGENERATE, 0)


def _solver_for(algorithm):
    if algorithm == "proposed":
        return solve
    if algorithm == "iht":
        return iht_solve
    raise ConfigError(f"algo must be one of {ALGORITHMS}, got {algorithm!r}")


def run_single_trial(n, m, s, sigma, master_seed, trial, algorithm, eta=0.95,
                     max_iters=1000, truth_tol=SUCCESS_THRESHOLD, rel_change_tol=1e-3,
                     blind=None):
    """Generate one seeded instance, initialize spectrally, run one solver.

    blind defaults to sigma > 0: noisy solves stop on the relative step
    change, noise-free solves may also stop on the error against the truth.
    Initialization failures fold into a degenerate outcome so a sweep never
    aborts on one bad trial.
    """
    solver = _solver_for(algorithm)
    inst = make_instance(n, m, s, sigma=sigma, master_seed=master_seed, trial=trial)
    if blind is None:
        blind = sigma > 0
    cfg = SolverConfig(s=int(s), eta=eta, max_iters=max_iters, rel_change_tol=rel_change_tol,
                       truth_rel_err_tol=None if blind else truth_tol)
    t0 = time.perf_counter()
    try:
        report = spectral_init(inst, int(s))
    except (DegenerateInputError, PowerIterationError):
        return TrialResult(_degenerate_outcome(inst, cfg), None, time.perf_counter() - t0, 0.0)
    init_s = time.perf_counter() - t0
    t1 = time.perf_counter()
    outcome = solver(inst, report.x0, cfg)
    return TrialResult(outcome, report, init_s, time.perf_counter() - t1)


def run_noise_trial(n, m, s, snr_db, master_seed, trial, algorithm, eta=0.95, max_iters=1000):
    """One noisy trial with sigma set from the target SNR.

    The SNR is the ratio ||truth|| / sigma expressed in dB, so
    sigma = ||truth|| * 10^(-snr_db / 10). Returns (TrialResult, sigma).
    """
    solver = _solver_for(algorithm)
    A = generate_gaussian_matrix(m, n, stream_rng(master_seed, MATRIX_STREAM, trial))
    truth = generate_sparse_signal(n, s, stream_rng(master_seed, SIGNAL_STREAM, trial))
    sigma = truth.norm * 10.0 ** (-float(snr_db) / 10.0)
    inst = measure(A, truth, sigma, stream_rng(master_seed, NOISE_STREAM, trial))
    cfg = SolverConfig(s=int(s), eta=eta, max_iters=max_iters, truth_rel_err_tol=None)
    t0 = time.perf_counter()
    try:
        report = spectral_init(inst, int(s))
    except (DegenerateInputError, PowerIterationError):
        return TrialResult(_degenerate_outcome(inst, cfg), None, time.perf_counter() - t0, 0.0), sigma
    init_s = time.perf_counter() - t0
    t1 = time.perf_counter()
    outcome = solver(inst, report.x0, cfg)
    return TrialResult(outcome, report, init_s, time.perf_counter() - t1), sigma


def _map_ordered(fn, keys, threads):
    """Apply fn over keys; output order never depends on scheduling."""
    if threads <= 1:
        return [fn(k) for k in keys]
    results = [None] * len(keys)
    with ThreadPoolExecutor(max_workers=threads) as ex:
        futures = {ex.submit(fn, k): i for i, k in enumerate(keys)}
        for fut in as_completed(futures):
            results[futures[fut]] = fut.result()
    return results


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _write_sidecar(grid):
    meta = {
        "config": asdict(grid),
        "package_version": _package_version(),
        "numpy_version": np.__version__,
        "scipy_version": scipy.__version__,
        "python_version": sys.version.split()[0],
        "created_utc": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    with open(str(grid.out) + ".meta.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _package_version():
    from . import __version__

    return __version__


def _trace_rows(cell, algo, trial, seed, outcome):
    n, m, s, sigma = cell
    rows = []
    for e in outcome.trace:
        rows.append([
            str(n), str(m), str(s), _fmt(float(sigma)), algo, str(trial), str(seed),
            str(e.k), _fmt(e.rel_err), _fmt(e.support_correct),
            "%.3f" % (e.elapsed_s * 1000.0),
        ])
    return rows


_CONVERGENCE_HEADER = ["n", "m", "s", "sigma", "algo", "trial", "seed", "iter",
                       "rel_err", "support_correct", "cum_time_ms"]


def run_convergence(grid):
    """Per-iteration traces for every cell, algorithm, and trial.

    Algorithms see identical per-trial instances because the data streams are
    derived from (master seed, role, trial) only.
    """
    cells = list(itertools.product(grid.n_values, grid.m_values, grid.s_values, grid.sigma_values))
    keys = [(ci, t) for ci in range(len(cells)) for t in range(grid.trials)]

    def work(key):
        ci, trial = key
        n, m, s, sigma = cells[ci]
        per_algo = {}
        for algo in grid.algorithms:
            res = run_single_trial(n, m, s, sigma, grid.master_seed, trial, algo,
                                   eta=grid.eta, max_iters=grid.max_iters)
            per_algo[algo] = res.outcome
        return per_algo

    results = dict(zip(keys, _map_ordered(work, keys, grid.threads)))
    rows = []
    for ci, cell in enumerate(cells):
        for algo in grid.algorithms:
            for trial in range(grid.trials):
                rows.extend(_trace_rows(cell, algo, trial, grid.master_seed, results[(ci, trial)][algo]))
    _write_csv(grid.out, _CONVERGENCE_HEADER, rows)
    _write_sidecar(grid)
    return rows


def run_phase_transition(grid):
    """Success rates over the (n, s, m) grid with the strict success rule."""
    cells = list(itertools.product(grid.n_values, grid.s_values, grid.m_values, grid.sigma_values))
    keys = [(ci, t) for ci in range(len(cells)) for t in range(grid.trials)]

    def work(key):
        ci, trial = key
        n, s, m, sigma = cells[ci]
        flags = {}
        for algo in grid.algorithms:
            res = run_single_trial(n, m, s, sigma, grid.master_seed, trial, algo,
                                   eta=grid.eta, max_iters=grid.max_iters)
            flags[algo] = is_success(res.outcome.trace[-1].rel_err)
        return flags

    results = dict(zip(keys, _map_ordered(work, keys, grid.threads)))
    rows = []
    for ci, (n, s, m, sigma) in enumerate(cells):
        for algo in grid.algorithms:
            successes = sum(int(results[(ci, t)][algo]) for t in range(grid.trials))
            rows.append([str(n), str(s), str(m), _fmt(float(sigma)), algo, str(grid.trials),
                         str(successes), repr(successes / grid.trials), str(grid.master_seed)])
    header = ["n", "s", "m", "sigma", "algo", "trials", "successes", "success_rate", "seed"]
    _write_csv(grid.out, header, rows)
    _write_sidecar(grid)
    return rows


def run_noise_sweep(grid):
    """Mean and spread of the final relative error at each target SNR."""
    cells = list(itertools.product(grid.n_values, grid.m_values, grid.s_values, grid.snr_db_values))
    keys = [(ci, a, t) for ci in range(len(cells)) for a in grid.algorithms for t in range(grid.trials)]

    def work(key):
        ci, algo, trial = key
        n, m, s, snr_db = cells[ci]
        res, sigma = run_noise_trial(n, m, s, snr_db, grid.master_seed, trial, algo,
                                     eta=grid.eta, max_iters=grid.max_iters)
        return res.outcome.trace[-1].rel_err, sigma

    results = dict(zip(keys, _map_ordered(work, keys, grid.threads)))
    rows = []
    for ci, (n, m, s, snr_db) in enumerate(cells):
        for algo in grid.algorithms:
            errs = np.array([results[(ci, algo, t)][0] for t in range(grid.trials)], dtype=float)
            sigmas = np.array([results[(ci, algo, t)][1] for t in range(grid.trials)], dtype=float)
            rows.append([
                str(n), str(m), str(s), algo, _fmt(float(snr_db)), repr(float(np.mean(sigmas))),
                repr(float(np.mean(errs))), repr(float(np.std(errs))), str(grid.trials),
                str(grid.master_seed),
            ])
    header = ["n", "m", "s", "algo", "snr_db", "sigma", "mean_rel_err", "std_rel_err", "trials", "seed"]
    _write_csv(grid.out, header, rows)
    _write_sidecar(grid)
    return rows


def run_timing(grid):
    """Median wall time per solve, with initialization timed separately.

    Generation cost is excluded; the solve median and the init median are
    reported side by side, and iterations is the median iteration count.
    """
    cells = []
    for n in grid.n_values:
        if grid.m_ratios:
            for r in grid.m_ratios:
                for s in grid.s_values:
                    cells.append((int(n), int(round(float(r) * int(n))), float(r), int(s)))
        else:
            for m in grid.m_values:
                for s in grid.s_values:
                    cells.append((int(n), int(m), int(m) / int(n), int(s)))
    sigma = grid.sigma_values[0] if grid.sigma_values else 0.0
    keys = [(ci, a, t) for ci in range(len(cells)) for a in grid.algorithms for t in range(grid.trials)]

    def work(key):
        ci, algo, trial = key
        n, m, _, s = cells[ci]
        res = run_single_trial(n, m, s, sigma, grid.master_seed, trial, algo,
                               eta=grid.eta, max_iters=grid.max_iters)
        return res.solve_s, res.init_s, res.outcome.iterations

    results = dict(zip(keys, _map_ordered(work, keys, grid.threads)))
    rows = []
    for ci, (n, m, ratio, s) in enumerate(cells):
        for algo in grid.algorithms:
            per = [results[(ci, algo, t)] for t in range(grid.trials)]
            rows.append([
                str(n), repr(float(ratio)), str(s), str(m), algo,
                "%.3f" % (float(np.median([p[0] for p in per])) * 1000.0),
                "%.3f" % (float(np.median([p[1] for p in per])) * 1000.0),
                repr(float(np.median([p[2] for p in per]))),
                str(grid.trials), str(grid.master_seed),
            ])
    header = ["n", "m_ratio", "s", "m", "algo", "median_time_ms", "median_init_time_ms",
              "iterations", "trials", "seed"]
    _write_csv(grid.out, header, rows)
    _write_sidecar(grid)
    return rows


def run(grid):
    """Dispatch one experiment grid; returns the data rows written."""
    if grid.kind in ("convergence", "single-solve"):
        return run_convergence(grid)
    if grid.kind == "phase-transition":
        return run_phase_transition(grid)
    if grid.kind == "noise-sweep":
        return run_noise_sweep(grid)
    if grid.kind == "timing":
        return run_timing(grid)
    raise ConfigError(f"experiment must be one of {KINDS}, got {grid.kind!r}")
