"""Command-line interface.

Exit codes: 0 on success, 2 on configuration/validation errors, 3 when
a numerical failure threshold is exceeded.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time

import numpy as np

from . import __version__
from .ci import (
    SIMULATED,
    default_critical_values,
    max_min_only_ci,
    pivotal_ci,
    write_critical_value_rows,
)
from .design import DesignGrid, read_sample_csv
from .errors import ConfigError, ExpressionError, SimulationFailureError
from .experiments import (
    ExperimentConfig,
    run_bw_comparison,
    run_coverage,
    run_estimator_comparison,
    run_length_study,
)
from .exprs import Expression
from .isotonic import block_fit
from .lrt import DEFAULT_LRT_CRITICAL, lrt_ci
from .models import (
    FAMILIES,
    CurrentStatusData,
    PanelCountData,
    current_status_ci,
    glm_isotonic_ci,
    grenander_ci,
    panel_count_ci,
)
from .simulate import PIVOT, SCALED_ERROR, SimConfig, simulate_D_quantile, simulate_pivot_quantile
from .variance import difference_variance, local_block_variance


def _parse_floats(text: str) -> list[float]:
    return [float(v) for v in str(text).split(",") if v.strip() != ""]


def _parse_grid(text: str) -> list[int]:
    return [int(v) for v in str(text).lower().replace("x", ",").split(",") if v.strip()]


def _interval_doc(interval) -> dict:
    return {
        "center": interval.center,
        "half_width": interval.half_width,
        "lower": interval.lower,
        "upper": interval.upper,
        "level": interval.level,
        "method": interval.method,
        "flag": interval.flag,
    }


def _emit(doc: dict, out: str | None) -> None:
    text = json.dumps(doc, indent=2, sort_keys=True, default=str)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _read_columns_csv(path, n_cols: int) -> list[np.ndarray]:
    rows = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or not "".join(row).strip():
                continue
            try:
                rows.append([float(v) for v in row[:n_cols]])
            except ValueError:
                if rows:
                    raise ConfigError(f"non-numeric row in {path}: {row!r}")
    if not rows:
        raise ConfigError(f"no data rows in {path}")
    data = np.asarray(rows, dtype=float)
    if data.shape[1] < n_cols:
        raise ConfigError(f"{path} needs at least {n_cols} columns")
    return [data[:, k] for k in range(n_cols)]


def _resolve_sigma(args, sample, fit) -> float:
    if args.variance == "known":
        if args.sigma is None:
            raise ConfigError("--sigma is required with --variance known")
        return float(args.sigma)
    if args.variance == "difference":
        return float(np.sqrt(difference_variance(sample).value))
    return float(np.sqrt(local_block_variance(sample, fit).value))


def _cmd_ci(args) -> int:
    sample = read_sample_csv(args.data, force=args.force_kind)
    x0 = np.asarray(_parse_floats(args.x0))
    c = args.c if args.c is not None else default_critical_values().value(sample.dim, args.delta)
    fit = block_fit(sample, x0)
    sigma = _resolve_sigma(args, sample, fit)
    level = 1 - args.delta
    if args.method == "pivotal":
        interval = pivotal_ci(fit, sigma, c, level=level)
    else:
        interval = max_min_only_ci(sample, x0, sigma, c, level=level)
    doc = _interval_doc(interval)
    doc.update(
        {
            "x0": x0.tolist(),
            "c": c,
            "sigma": sigma,
            "n_block": fit.n_points,
            "estimates": {
                "max_min": fit.max_min,
                "min_max": fit.min_max,
                "average": fit.average,
            },
        }
    )
    _emit(doc, args.out)
    return 0


def _cmd_simulate(args) -> int:
    grid = DesignGrid.regular_lattice(_parse_grid(args.grid))
    x0 = np.asarray(_parse_floats(args.x0))
    deltas = _parse_floats(args.deltas)
    statistic = PIVOT if args.statistic == "pivot" else SCALED_ERROR
    cfg = SimConfig(
        truth=Expression(args.f0),
        grid=grid,
        x0=x0,
        sigma=args.sigma,
        B=args.B,
        seed=args.seed,
        statistic=statistic,
    )
    start = time.time()
    if statistic == PIVOT:
        estimates = simulate_pivot_quantile(cfg, deltas, workers=args.workers)
    else:
        if not args.partials:
            raise ConfigError("--partials is required for the scaled-error statistic")
        estimates = simulate_D_quantile(
            cfg, _parse_floats(args.partials), deltas, workers=args.workers
        )
    d = grid.dim
    rows = [
        {
            "d": d,
            "delta": est.delta,
            "c": est.c,
            "provenance": SIMULATED,
            "stderr": est.stderr,
            "seed": args.seed,
            "B": est.B_used,
        }
        for est in estimates
    ]
    with open(args.out, "w", newline="") as fh:
        write_critical_value_rows(fh, rows)
    meta = {
        "command": "simulate-critical-values",
        "grid": grid.shape,
        "f0": args.f0,
        "x0": x0.tolist(),
        "sigma": args.sigma,
        "B": args.B,
        "seed": args.seed,
        "statistic": args.statistic,
        "workers": args.workers,
        "elapsed_seconds": round(time.time() - start, 3),
        "versions": {"isoci": __version__, "numpy": np.__version__},
    }
    with open(args.out + ".meta.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return 0


def _run_experiment(args, runner) -> int:
    cfg = ExperimentConfig.from_json(args.config)
    if args.workers is not None:
        cfg.workers = args.workers
    start = time.time()
    report = runner(cfg)
    out = args.out or "report"
    if hasattr(report, "to_csv"):
        report.to_csv(out + ".csv")
    if hasattr(report, "write_meta"):
        report.write_meta(out + ".meta.json", cfg, time.time() - start)
    else:
        with open(out + ".meta.json", "w") as fh:
            json.dump(
                {
                    "config": cfg.__dict__,
                    "slope": getattr(report, "slope", None),
                    "meta": getattr(report, "meta", {}),
                    "versions": {"isoci": __version__, "numpy": np.__version__},
                    "elapsed_seconds": round(time.time() - start, 3),
                },
                fh,
                indent=2,
                sort_keys=True,
                default=str,
            )
            fh.write("\n")
    return 0


def _cmd_grenander(args) -> int:
    (data,) = _read_columns_csv(args.data, 1)
    c = args.c if args.c is not None else default_critical_values().value(1, args.delta)
    interval = grenander_ci(data, args.x0, c, level=1 - args.delta)
    _emit(_interval_doc(interval), args.out)
    return 0


def _cmd_current_status(args) -> int:
    times, indicators = _read_columns_csv(args.data, 2)
    c = args.c if args.c is not None else default_critical_values().value(1, args.delta)
    interval = current_status_ci(
        CurrentStatusData(times, indicators), args.t0, c, level=1 - args.delta
    )
    _emit(_interval_doc(interval), args.out)
    return 0


def _cmd_panel_count(args) -> int:
    subject, times, counts = _read_columns_csv(args.data, 3)
    data = PanelCountData.from_long(subject, times, counts)
    c = args.c if args.c is not None else default_critical_values().value(1, args.delta)
    interval = panel_count_ci(data, args.t0, c, level=1 - args.delta)
    _emit(_interval_doc(interval), args.out)
    return 0


def _cmd_glm(args) -> int:
    x, y = _read_columns_csv(args.data, 2)
    order = np.argsort(x, kind="stable")
    c = args.c if args.c is not None else default_critical_values().value(1, args.delta)
    interval = glm_isotonic_ci(
        x[order],
        y[order],
        FAMILIES[args.family],
        args.x0,
        c,
        variance_mode=args.variance,
        level=1 - args.delta,
    )
    _emit(_interval_doc(interval), args.out)
    return 0


def _cmd_lrt(args) -> int:
    sample = read_sample_csv(args.data, force=args.force_kind)
    sigma2 = None if args.sigma == "diff" else float(args.sigma_value)
    interval = lrt_ci(sample, args.x0, crit=args.ddelta, sigma2=sigma2)
    _emit(_interval_doc(interval), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="isoci",
        description="Pointwise confidence intervals for isotonic and monotone models",
    )
    parser.add_argument("--version", action="version", version=f"isoci {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ci", help="interval for a regression sample from CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--x0", required=True, help="comma-separated coordinates")
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--c", type=float, default=None, help="override the critical value")
    p.add_argument("--method", choices=["pivotal", "maxmin"], default="pivotal")
    p.add_argument(
        "--variance", choices=["known", "difference", "local-block"], default="difference"
    )
    p.add_argument("--sigma", type=float, default=None)
    p.add_argument("--force-kind", choices=["lattice", "scatter"], default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_ci)

    p = sub.add_parser("simulate-critical-values", help="Monte Carlo critical values")
    p.add_argument("--dim", type=int, default=None, help="informational; grid fixes d")
    p.add_argument("--grid", required=True, help="e.g. 10000 or 50x50")
    p.add_argument("--f0", required=True, help="truth expression in x1..xd")
    p.add_argument("--x0", required=True)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--B", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--deltas", default="0.05,0.10")
    p.add_argument("--statistic", choices=["pivot", "scaled-error"], default="pivot")
    p.add_argument("--partials", default=None, help="true partials at x0 (scaled-error)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_simulate)

    for name, runner in (
        ("coverage", run_coverage),
        ("length-study", run_length_study),
        ("compare-estimators", run_estimator_comparison),
        ("compare-bw", run_bw_comparison),
    ):
        p = sub.add_parser(name, help=f"run the {name.replace('-', ' ')} experiment")
        p.add_argument("--config", required=True, help="JSON config document or path")
        p.add_argument("--out", default=None, help="output path prefix")
        p.add_argument("--workers", type=int, default=None)
        p.set_defaults(func=lambda a, r=runner: _run_experiment(a, r))

    p = sub.add_parser("grenander-ci", help="decreasing-density interval")
    p.add_argument("--data", required=True, help="CSV with one observation per row")
    p.add_argument("--x0", type=float, required=True)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--c", type=float, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_grenander)

    p = sub.add_parser("current-status-ci", help="CDF interval from current status data")
    p.add_argument("--data", required=True, help="CSV with columns time,indicator")
    p.add_argument("--t0", type=float, required=True)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--c", type=float, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_current_status)

    p = sub.add_parser("panel-count-ci", help="mean-function interval from panel counts")
    p.add_argument("--data", required=True, help="CSV with columns subject,time,count")
    p.add_argument("--t0", type=float, required=True)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--c", type=float, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_panel_count)

    p = sub.add_parser("glm-ci", help="monotone GLM mean interval")
    p.add_argument("--data", required=True, help="CSV with columns x,y")
    p.add_argument("--family", choices=sorted(FAMILIES), required=True)
    p.add_argument("--x0", type=float, required=True)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--c", type=float, default=None)
    p.add_argument("--variance", choices=["family", "local_block"], default="family")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_glm)

    p = sub.add_parser("bw-ci", help="likelihood-ratio interval (univariate)")
    p.add_argument("--data", required=True)
    p.add_argument("--x0", type=float, required=True)
    p.add_argument("--ddelta", type=float, default=DEFAULT_LRT_CRITICAL)
    p.add_argument("--sigma", choices=["known", "diff"], default="diff")
    p.add_argument("--sigma-value", type=float, default=1.0)
    p.add_argument("--force-kind", choices=["lattice", "scatter"], default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_lrt)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ExpressionError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SimulationFailureError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
