"""Command-line front end wiring the pipeline together.

Each subcommand is a thin wrapper over one library operation; arrays move
between commands as binary containers (see qfa.container), human-facing
series and grid exports are CSV with a header row, '.' decimals, and LF
line endings.  Exit codes: 0 success, 2 validation, 3 numeric/solver
failure, 4 I/O failure.
"""

import argparse
import csv
import json
import os
import sys

import numpy as np

import jsonschema

from . import __version__
from .arrays import MultiSeries, QacfArray, QdftArray, QSpecMatrix, QuantileSeriesArray
from .container import read_container, write_container
from .errors import NumericError, SolverError, ValidationError
from .qdft import qdft, sqdft
from .qseries import qacf, qper, qser
from .qsmooth import SmootherConfig, lwqs, qslw
from .simulate import SimConfig, simulate_pair
from .spectral import LagWindow, kld, lw_estimate
from ._pool import default_workers

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERIC = 3
EXIT_IO = 4

RUN_CONFIG_SCHEMA = {
    "type": "object",
    "properties": {
        "input": {"type": "string"},
        "output": {"type": "string"},
        "levels": {
            "type": "object",
            "properties": {
                "min": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "max": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "step": {"type": "number", "exclusiveMinimum": 0},
            },
            "required": ["min", "max", "step"],
            "additionalProperties": False,
        },
        "window": {
            "type": "object",
            "properties": {
                "kind": {"enum": ["tukey-hanning", "bartlett", "parzen"]},
                "M": {"type": "number", "exclusiveMinimum": 0},
            },
            "required": ["kind", "M"],
            "additionalProperties": False,
        },
        "smoother": {
            "type": "object",
            "properties": {
                "lambda_mode": {"enum": ["gcv", "fixed"]},
                "lambda": {"type": "number", "exclusiveMinimum": 0},
                "ar1_whiten": {"type": "boolean"},
                "ar1_rho_mode": {"enum": ["estimate", "fixed"]},
                "ar1_rho": {"type": "number", "exclusiveMinimum": -1, "exclusiveMaximum": 1},
            },
            "additionalProperties": False,
        },
        "sqr": {
            "type": "object",
            "properties": {
                "mu": {"type": "number"},
                "weighted": {"type": "boolean"},
                "max_knots": {"type": "integer", "minimum": 0},
            },
            "additionalProperties": False,
        },
        "sim": {
            "type": "object",
            "properties": {
                "n": {"type": "integer", "minimum": 8},
                "burn_in": {"type": "integer", "minimum": 0},
                "delay": {"type": "integer", "minimum": 0},
            },
            "additionalProperties": False,
        },
        "seed": {"type": "integer"},
        "runs": {"type": "integer", "minimum": 1},
        "threads": {"type": "integer", "minimum": 1},
    },
    "additionalProperties": False,
}


def load_run_config(path):
    with open(path) as fh:
        cfg = json.load(fh)
    jsonschema.validate(cfg, RUN_CONFIG_SCHEMA)
    return cfg


def parse_levels(spec):
    """'min:max:step' or a config dict into a level grid."""
    if isinstance(spec, str):
        try:
            lo, hi, step = (float(x) for x in spec.split(":"))
        except ValueError as exc:
            raise ValidationError(f"bad levels spec {spec!r}; want min:max:step") from exc
    else:
        lo, hi, step = spec["min"], spec["max"], spec["step"]
    if not (0 < lo <= hi < 1) or step <= 0:
        raise ValidationError("levels must satisfy 0 < min <= max < 1, step > 0")
    count = int(round((hi - lo) / step)) + 1
    levels = lo + step * np.arange(count)
    if levels[-1] >= 1.0 or abs(levels[-1] - hi) > 1e-9:
        raise ValidationError("step does not evenly divide the level range")
    return levels


def write_series_csv(path, series):
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"y{j + 1}" for j in range(series.m)])
        for t in range(series.n):
            writer.writerow([repr(float(v)) for v in series.values[:, t]])


def read_series_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise ValidationError(f"{path}: no data rows")
    try:
        data = np.array([[float(v) for v in row] for row in rows[1:]], dtype=float)
    except ValueError as exc:
        raise ValidationError(f"{path}: non-numeric value in series CSV") from exc
    return MultiSeries(data.T)


def _expect_kind(obj, types, what):
    if not isinstance(obj, types):
        raise ValidationError(f"expected a {what} container, got {type(obj).__name__}")
    return obj


def cmd_simulate(args):
    cfg = load_run_config(args.config) if args.config else {}
    sim = cfg.get("sim", {})
    n = args.n if args.n is not None else sim.get("n", 512)
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    sc = SimConfig(
        n=n,
        seed=seed,
        burn_in=sim.get("burn_in", 1000),
        delay=sim.get("delay", 10),
    )
    series = simulate_pair(sc)
    out = args.out or cfg.get("output")
    if not out:
        raise ValidationError("no output path given (--out or config output)")
    write_series_csv(out, series)
    return EXIT_OK


def _resolve_levels(args, cfg):
    if args.levels:
        return parse_levels(args.levels)
    if "levels" in cfg:
        return parse_levels(cfg["levels"])
    return parse_levels("0.1:0.9:0.01")


def cmd_qdft(args):
    cfg = load_run_config(args.config) if args.config else {}
    series = read_series_csv(args.input)
    levels = _resolve_levels(args, cfg)
    threads = args.threads or cfg.get("threads") or default_workers()
    result = qdft(series, levels, workers=threads)
    write_container(args.out, result)
    return EXIT_OK


def cmd_sqdft(args):
    cfg = load_run_config(args.config) if args.config else {}
    series = read_series_csv(args.input)
    levels = _resolve_levels(args, cfg)
    sqr_cfg = cfg.get("sqr", {})
    mu = args.mu if args.mu is not None else sqr_cfg.get("mu")
    if mu is None:
        raise ValidationError("sqdft needs --mu (or a config sqr.mu)")
    weighted = args.weighted or sqr_cfg.get("weighted", False)
    max_knots = args.max_knots if args.max_knots is not None else sqr_cfg.get("max_knots")
    threads = args.threads or cfg.get("threads") or default_workers()
    result = sqdft(series, levels, mu=mu, weighted=weighted, max_knots=max_knots,
                   workers=threads)
    write_container(args.out, result)
    return EXIT_OK


def cmd_qser(args):
    z = _expect_kind(read_container(args.input), QdftArray, "qdft")
    write_container(args.out, qser(z))
    return EXIT_OK


def cmd_qacf(args):
    z = _expect_kind(read_container(args.input), QdftArray, "qdft")
    write_container(args.out, qacf(qser(z)))
    return EXIT_OK


def cmd_qper(args):
    z = _expect_kind(read_container(args.input), QdftArray, "qdft")
    write_container(args.out, qper(z))
    return EXIT_OK


def cmd_lw(args):
    acf = _expect_kind(read_container(args.input), QacfArray, "qacf")
    window = LagWindow(kind=args.kind, M=args.M)
    write_container(args.out, lw_estimate(acf, window))
    return EXIT_OK


def _smoother_from(args, cfg):
    sm = cfg.get("smoother", {})
    mode = args.lambda_mode or sm.get("lambda_mode", "gcv")
    lam = args.lam if args.lam is not None else sm.get("lambda")
    return SmootherConfig(
        lambda_mode=mode,
        lam=lam,
        ar1_whiten=args.ar1 or sm.get("ar1_whiten", False),
        ar1_rho_mode=sm.get("ar1_rho_mode", "estimate"),
        ar1_rho=sm.get("ar1_rho", 0.0),
    )


def cmd_smooth(args):
    cfg = load_run_config(args.config) if args.config else {}
    obj = read_container(args.input)
    smoother = _smoother_from(args, cfg)
    if isinstance(obj, QSpecMatrix):
        if obj.kind != "lw-estimate":
            raise ValidationError("can only smooth lw-estimate spectral containers")
        write_container(args.out, lwqs(obj, smoother))
    elif isinstance(obj, QdftArray):
        write_container(args.out, qslw(obj, smoother))
    else:
        raise ValidationError("smooth expects a qdft or qspec container")
    return EXIT_OK


def cmd_kld(args):
    est = _expect_kind(read_container(args.est), QSpecMatrix, "qspec")
    truth = _expect_kind(read_container(args.truth), QSpecMatrix, "qspec")
    if est.s.shape != truth.s.shape and truth.V > est.V:
        from .arrays import half_grid_indices

        n = int(round(2 * np.pi / truth.freqs[1])) if truth.freqs[1] > 0 else 0
        idx = half_grid_indices(n, truth.freqs)
        if idx.size == est.V:
            truth = truth.restrict(idx)
    result = kld(est, truth)
    json.dump({"kld": result.value, "V": result.grid[0], "L": result.grid[1]},
              sys.stdout)
    sys.stdout.write("\n")
    return EXIT_OK


def cmd_export(args):
    obj = read_container(args.input)
    j = args.j - 1
    k = (args.k - 1) if args.k is not None else j
    part = {"real": np.real, "imag": np.imag, "mod": np.abs}[args.part]
    if isinstance(obj, QSpecMatrix):
        if not (0 <= j < obj.m and 0 <= k < obj.m):
            raise ValidationError("series indices out of range")
        header = ("frequency", "level", "value")
        axis_vals = obj.freqs
        grid = part(obj.s[:, :, j, k])  # (L, V)
    elif isinstance(obj, QdftArray):
        if not 0 <= j < obj.m:
            raise ValidationError("series index out of range")
        header = ("frequency", "level", "value")
        axis_vals = 2.0 * np.pi * np.arange(obj.n) / obj.n
        grid = part(obj.z[j])  # (L, n)
    elif isinstance(obj, QuantileSeriesArray):
        if not 0 <= j < obj.m:
            raise ValidationError("series index out of range")
        header = ("time", "level", "value")
        axis_vals = np.arange(1, obj.n + 1, dtype=float)
        grid = part(obj.x[j])
    elif isinstance(obj, QacfArray):
        if not (0 <= j < obj.m and 0 <= k < obj.m):
            raise ValidationError("series indices out of range")
        header = ("lag", "level", "value")
        axis_vals = np.arange(obj.n, dtype=float)
        grid = part(obj.gamma[j, k])
    else:
        raise ValidationError("unsupported container for export")
    with open(args.out, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        L = obj.levels.size
        for vi, f in enumerate(axis_vals):
            for li in range(L):
                writer.writerow([repr(float(f)), repr(float(obj.levels[li])),
                                 repr(float(grid[li, vi]))])
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="qfa",
        description="Quantile-frequency analysis pipeline",
    )
    parser.add_argument("--version", action="version", version=f"qfa {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.set_defaults(func=fn)
        return p

    p = add("simulate", cmd_simulate, help="generate the two-series testbed as CSV")
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--n", type=int, help="series length")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--out", help="output CSV path")

    for name, fn, extra in (("qdft", cmd_qdft, False), ("sqdft", cmd_sqdft, True)):
        p = add(name, fn, help=f"compute the {name} of a series CSV")
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--input", required=True, help="input series CSV")
        p.add_argument("--levels", help="level grid min:max:step")
        p.add_argument("--out", required=True, help="output container")
        p.add_argument("--threads", type=int, help="worker processes")
        if extra:
            p.add_argument("--mu", type=float, help="smoothing exponent")
            p.add_argument("--weighted", action="store_true",
                           help="level-dependent penalty weights")
            p.add_argument("--max-knots", type=int, dest="max_knots")

    for name, fn, desc in (
        ("qser", cmd_qser, "quantile series from a qdft container"),
        ("qacf", cmd_qacf, "quantile autocovariances from a qdft container"),
        ("qper", cmd_qper, "quantile periodograms from a qdft container"),
    ):
        p = add(name, fn, help=desc)
        p.add_argument("--input", required=True)
        p.add_argument("--out", required=True)

    p = add("lw", cmd_lw, help="lag-window spectral estimate from a qacf container")
    p.add_argument("--input", required=True)
    p.add_argument("--kind", default="tukey-hanning",
                   choices=["tukey-hanning", "bartlett", "parzen"])
    p.add_argument("--M", type=float, required=True, help="window bandwidth")
    p.add_argument("--out", required=True)

    p = add("smooth", cmd_smooth,
            help="smooth a qspec (entrywise) or qdft (columnwise) container over levels")
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--input", required=True)
    p.add_argument("--lambda-mode", dest="lambda_mode", choices=["gcv", "fixed"])
    p.add_argument("--lambda", dest="lam", type=float, help="fixed penalty value")
    p.add_argument("--ar1", action="store_true", help="AR(1)-whitened criterion")
    p.add_argument("--out", required=True)

    p = add("kld", cmd_kld, help="divergence of an estimate from a truth container")
    p.add_argument("--est", required=True)
    p.add_argument("--truth", required=True)

    p = add("export", cmd_export, help="long-format CSV of one container slice")
    p.add_argument("--input", required=True)
    p.add_argument("--j", type=int, default=1, help="series index (1-based)")
    p.add_argument("--k", type=int, help="second series index (1-based)")
    p.add_argument("--part", default="real", choices=["real", "imag", "mod"])
    p.add_argument("--out", required=True)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, jsonschema.ValidationError, json.JSONDecodeError) as exc:
        print(f"qfa: validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (SolverError, NumericError) as exc:
        print(f"qfa: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"qfa: i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
