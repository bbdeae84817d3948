"""Command line entry point for the experiment harness.

Example:
    sparsephase --experiment convergence --n 2000 --m 1500 --s 20 \
        --trials 10 --seed 7 --out traces.csv

Values may also come from a JSON config file via --config; explicit flags
override the file. List-valued flags take comma-separated values.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .exceptions import ConfigError
from .experiments import ALGORITHMS, KINDS, ExperimentGrid, run

_LIST_KEYS = {"n", "m", "m_ratio", "s", "sigma", "snr_db", "algo"}
_DEFAULTS = {
    "sigma": [0.0],
    "algo": ["proposed"],
    "trials": 1,
    "seed": 0,
    "eta": 0.95,
    "max_iters": 1000,
    "out": "results.csv",
    "threads": os.cpu_count() or 1,
}


def _int_list(text):
    return [int(v) for v in str(text).split(",") if v != ""]


def _float_list(text):
    return [float(v) for v in str(text).split(",") if v != ""]


def _str_list(text):
    return [v for v in str(text).split(",") if v != ""]


def build_parser():
    p = argparse.ArgumentParser(prog="sparsephase", description="Run one reproducible experiment and write a CSV.")
    p.add_argument("--experiment", choices=KINDS, help="experiment kind")
    p.add_argument("--n", type=_int_list, help="signal dimensions, comma separated")
    p.add_argument("--m", type=_int_list, help="measurement counts, comma separated")
    p.add_argument("--m-ratio", dest="m_ratio", type=_float_list, help="m/n ratios for timing sweeps")
    p.add_argument("--s", type=_int_list, help="sparsity levels, comma separated")
    p.add_argument("--sigma", type=_float_list, help="noise levels, comma separated")
    p.add_argument("--snr-db", dest="snr_db", type=_float_list, help="target SNRs in dB for noise sweeps")
    p.add_argument("--eta", type=float, help="gradient stepsize")
    p.add_argument("--trials", type=int, help="trials per cell")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--algo", type=_str_list, help=f"algorithms from {ALGORITHMS}, comma separated")
    p.add_argument("--max-iters", dest="max_iters", type=int, help="iteration cap")
    p.add_argument("--out", help="output CSV path")
    p.add_argument("--threads", type=int, help="worker threads for trials")
    p.add_argument("--config", help="JSON file with the same keys as the flags")
    return p


def parse_config(argv=None):
    """Resolve flags over the optional config file into an ExperimentGrid."""
    ns = build_parser().parse_args(argv)
    settings = dict(_DEFAULTS)
    if ns.config:
        try:
            with open(ns.config, "r", encoding="utf-8") as fh:
                loaded = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}")
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        for key, value in loaded.items():
            # accept the flag spelling (m-ratio) as well as the dest (m_ratio)
            key = key.replace("-", "_")
            if key == "config" or not hasattr(ns, key):
                raise ConfigError(f"unknown config key {key!r}")
            if key in _LIST_KEYS and not isinstance(value, list):
                value = [value]
            settings[key] = value
    for key, value in vars(ns).items():
        if key != "config" and value is not None:
            settings[key] = value

    if "experiment" not in settings:
        raise ConfigError("experiment is required")
    for required in ("n", "s"):
        if required not in settings:
            raise ConfigError(f"{required} is required")
    if settings["experiment"] == "timing":
        if "m" not in settings and "m_ratio" not in settings:
            raise ConfigError("timing needs m or m-ratio")
    elif "m" not in settings:
        raise ConfigError("m is required")
    if settings["experiment"] == "noise-sweep" and "snr_db" not in settings:
        raise ConfigError("noise-sweep needs snr-db values")

    return ExperimentGrid(
        kind=settings["experiment"],
        n_values=settings["n"],
        s_values=settings["s"],
        m_values=settings.get("m", []),
        m_ratios=settings.get("m_ratio", []),
        sigma_values=settings["sigma"],
        snr_db_values=settings.get("snr_db", []),
        algorithms=settings["algo"],
        trials=int(settings["trials"]),
        master_seed=int(settings["seed"]),
        eta=float(settings["eta"]),
        max_iters=int(settings["max_iters"]),
        threads=int(settings["threads"]),
        out=str(settings["out"]),
    )


def main(argv=None):
    try:
        grid = parse_config(argv)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        rows = run(grid)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {len(rows)} rows to {grid.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
