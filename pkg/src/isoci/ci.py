"""Confidence interval constructors and critical-value tables.

The pivotal interval is centred at the block-average estimate with
half-width c * sigma / sqrt(n_block); variants cover the max-min-only
estimator, the infeasible oracle interval with known partial
derivatives, and critical-value adjustment through a smooth monotone
proxy of the fit.
"""

from __future__ import annotations

import csv
import importlib.resources
import io
import math
from dataclasses import dataclass

import numpy as np

from .design import Sample
from .errors import ScatterUnsupportedError
from .isotonic import BlockFit, block_fit, fit_at_design_points, max_min_block_count
from .smoothing import loess
from .variance import difference_variance, local_block_variance

PAPER_TABLE = "paper_table"
SIMULATED = "simulated"
CV_ADJUSTED = "cv_adjusted"

PIVOTAL = "pivotal"
MAX_MIN_ONLY = "max_min_only"
ORACLE = "oracle"


@dataclass(frozen=True)
class ConfidenceInterval:
    """Symmetric interval [center - half_width, center + half_width],
    possibly truncated to the ``clipped`` range."""

    center: float
    half_width: float
    lower: float
    upper: float
    level: float
    method: str
    clipped: tuple[float, float] | None = None
    flag: str | None = None

    def __post_init__(self):
        if self.half_width < 0:
            raise ValueError("half-width must be nonnegative")
        if not 0 < self.level < 1:
            raise ValueError("level must lie in (0, 1)")
        if self.lower > self.upper:
            raise ValueError("interval endpoints out of order")

    @property
    def length(self) -> float:
        return self.upper - self.lower

    def covers(self, value: float) -> bool:
        return self.lower <= value <= self.upper


def symmetric_interval(
    center: float,
    half_width: float,
    level: float,
    method: str,
    clip: tuple[float, float] | None = None,
    flag: str | None = None,
) -> ConfidenceInterval:
    lower = center - half_width
    upper = center + half_width
    if clip is not None:
        lower = max(lower, clip[0])
        upper = min(upper, clip[1])
    return ConfidenceInterval(
        center=center,
        half_width=half_width,
        lower=lower,
        upper=upper,
        level=level,
        method=method,
        clipped=clip,
        flag=flag,
    )


@dataclass(frozen=True)
class CriticalValueTable:
    """Map (dimension, delta) -> critical value, with provenance."""

    entries: dict
    provenance: str
    stderr: dict | None = None
    seed: int | None = None
    n_reps: int | None = None

    def __post_init__(self):
        keyed = {(int(d), round(float(delta), 10)): float(c) for (d, delta), c in self.entries.items()}
        object.__setattr__(self, "entries", keyed)
        by_dim: dict[int, list] = {}
        for (d, delta), c in keyed.items():
            by_dim.setdefault(d, []).append((delta, c))
        for d, rows in by_dim.items():
            rows.sort()
            for (d1, c1), (d2, c2) in zip(rows, rows[1:]):
                if c1 <= c2:
                    raise ValueError(
                        f"critical values must strictly decrease in delta (d={d})"
                    )

    def value(self, d: int, delta: float) -> float:
        key = (int(d), round(float(delta), 10))
        if key not in self.entries:
            avail = sorted(k for k in self.entries if k[0] == int(d))
            raise KeyError(
                f"no critical value for d={d}, delta={delta}; available: {avail}"
            )
        return self.entries[key]

    def rows(self) -> list[dict]:
        out = []
        for (d, delta), c in sorted(self.entries.items()):
            se = (self.stderr or {}).get((d, delta))
            out.append(
                {
                    "d": d,
                    "delta": delta,
                    "c": c,
                    "provenance": self.provenance,
                    "stderr": se,
                    "seed": self.seed,
                    "B": self.n_reps,
                }
            )
        return out

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            write_critical_value_rows(fh, self.rows())

    @staticmethod
    def from_csv(path) -> "CriticalValueTable":
        with open(path, newline="") as fh:
            return _table_from_rows(csv.DictReader(fh))


CRITICAL_VALUE_COLUMNS = ["d", "delta", "c", "provenance", "stderr", "seed", "B"]


def write_critical_value_rows(fh, rows) -> None:
    writer = csv.DictWriter(fh, fieldnames=CRITICAL_VALUE_COLUMNS)
    writer.writeheader()
    for row in rows:
        out = dict(row)
        for k in ("stderr",):
            if out.get(k) is not None:
                out[k] = f"{out[k]:.6g}"
        writer.writerow({k: ("" if out.get(k) is None else out[k]) for k in CRITICAL_VALUE_COLUMNS})


def _table_from_rows(reader) -> CriticalValueTable:
    entries = {}
    stderr = {}
    provenance = PAPER_TABLE
    seed = n_reps = None
    for row in reader:
        key = (int(row["d"]), float(row["delta"]))
        entries[key] = float(row["c"])
        if row.get("stderr"):
            stderr[key] = float(row["stderr"])
        if row.get("provenance"):
            provenance = row["provenance"]
        if row.get("seed"):
            seed = int(row["seed"])
        if row.get("B"):
            n_reps = int(row["B"])
    return CriticalValueTable(
        entries=entries, provenance=provenance, stderr=stderr or None, seed=seed, n_reps=n_reps
    )


def default_critical_values() -> CriticalValueTable:
    """Suggested critical values shipped with the package."""
    text = importlib.resources.files("isoci").joinpath("data/critical_values.csv").read_text()
    return _table_from_rows(csv.DictReader(io.StringIO(text)))


# -- interval constructors ------------------------------------------------


def pivotal_ci(fit: BlockFit, sigma: float, c: float, level: float = 0.95) -> ConfidenceInterval:
    """Pivotal interval centred at the block-average estimate.

    half-width = c * sigma / sqrt(n_points of the data-driven block).
    """
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    if c < 0:
        raise ValueError("critical value must be nonnegative")
    hw = c * sigma / math.sqrt(fit.n_points)
    return symmetric_interval(fit.average, hw, level, PIVOTAL)


def max_min_only_ci(
    sample: Sample, x0, sigma: float, c: float, level: float = 0.95
) -> ConfidenceInterval:
    """Interval centred at the max-min estimate with its own block count."""
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    value, count = max_min_block_count(sample, x0)
    hw = c * sigma / math.sqrt(count)
    return symmetric_interval(value, hw, level, MAX_MIN_ONLY)


def oracle_ci(
    center: float, partials, sigma: float, n: int, c: float, level: float = 0.95
) -> ConfidenceInterval:
    """Infeasible benchmark interval using the true partial derivatives.

    half-width = c * (n / sigma^2)^(-1/(d+2)) * prod(partials/2)^(1/(d+2)).
    """
    partials = np.atleast_1d(np.asarray(partials, dtype=float))
    if np.any(partials <= 0):
        raise ValueError("oracle interval needs strictly positive partial derivatives")
    d = len(partials)
    if sigma == 0:
        hw = 0.0
    else:
        hw = c * (n / sigma**2) ** (-1.0 / (d + 2)) * float(
            np.prod(partials / 2.0)
        ) ** (1.0 / (d + 2))
    return symmetric_interval(center, hw, level, ORACLE)


def oracle_half_width(partials, sigma: float, n: int, c: float) -> float:
    return oracle_ci(0.0, partials, sigma, n, c).half_width


# -- critical-value adjustment --------------------------------------------


def smooth_proxy(sample: Sample, span: float = 0.75, degree: int | None = None) -> Sample:
    """Smooth monotone proxy of the block-average fit.

    Stage 1: tricube local polynomial regression of the fitted values on
    the design (local quadratic in d = 1, local linear otherwise, span
    0.75 of the points).  Stage 2: block-average isotonisation of the
    smoothed values at the design points.  The d = 3 window rule follows
    the d = 2 one; there is no separate prescription for it.
    """
    _, _, avg = fit_at_design_points(sample)
    if degree is None:
        degree = 2 if sample.dim == 1 else 1
    pts = sample.grid.points() if sample.grid.is_lattice else sample.grid.points_array
    smoothed = loess(pts, avg.ravel(), span=span, degree=degree)
    smooth_sample = Sample(sample.grid, smoothed.reshape(sample.y.shape))
    _, _, proxy = fit_at_design_points(smooth_sample)
    return Sample(sample.grid, proxy)


def adjusted_critical_value(
    sample: Sample,
    x0,
    delta: float,
    B: int,
    seed: int,
    workers: int = 1,
    span: float = 0.75,
) -> tuple[float, float]:
    """Critical value resimulated under a smooth proxy of the fit.

    The proxy replaces the unknown truth and the noise scale is matched
    to the data through the difference estimator (lattice) or the
    local-block estimator (scatter).  Returns (c, mc_stderr).
    """
    from .simulate import PIVOT, SimConfig, simulate_pivot_quantile

    if B < 1000:
        raise ValueError("critical-value adjustment needs B >= 1000 replications")
    proxy = smooth_proxy(sample, span=span)
    try:
        sigma2 = difference_variance(sample).value
    except (ScatterUnsupportedError, ValueError):
        sigma2 = local_block_variance(sample, block_fit(sample, x0)).value
    cfg = SimConfig(
        truth=proxy.y,
        grid=sample.grid,
        x0=np.atleast_1d(np.asarray(x0, dtype=float)),
        sigma=math.sqrt(sigma2),
        B=B,
        seed=seed,
        statistic=PIVOT,
    )
    (est,) = simulate_pivot_quantile(cfg, [delta], workers=workers)
    return est.c, est.stderr
