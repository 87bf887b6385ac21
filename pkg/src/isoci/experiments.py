"""Batch experiment drivers: coverage, length and method-comparison studies.

Every run is a pure function of (config, seed): replications draw from
counter-based streams keyed by the replication index, methods under
comparison share each replication's noise exactly, and aggregation is
order-independent, so reports are byte-identical for any worker count.
"""

from __future__ import annotations

import json
import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields

import numpy as np

from . import __version__, _kernels
from .ci import default_critical_values
from .design import DesignGrid, Sample
from .errors import (
    BoundaryVarianceWarning,
    ConfigError,
    DegenerateBoundaryWarning,
    EmptySeriesError,
    NoFeasibleBlockError,
    OutOfSupportError,
)
from .exprs import Expression
from .lrt import DEFAULT_LRT_CRITICAL, LrtProfile, _bracket_and_bisect as _lrt_bracket
from .models import (
    FAMILIES,
    current_status_ci,
    grenander_ci,
    panel_count_ci,
    glm_isotonic_ci,
    PanelCountData,
    CurrentStatusData,
)
from .simulate import replication_rng
from .variance import difference_variance

SCHEMA_VERSION = 1

REGRESSION = "regression"
GRENANDER = "grenander"
CURRENT_STATUS = "current_status"
PANEL_COUNT = "panel_count"
GLM = "glm"
MODELS = (REGRESSION, GRENANDER, CURRENT_STATUS, PANEL_COUNT, GLM)

PIVOTAL = "pivotal"
MAX_MIN_ONLY = "max_min_only"
CV_ADJUSTED = "cv_adjusted"
ORACLE = "oracle"
LRT = "lrt"
METHODS = (PIVOTAL, MAX_MIN_ONLY, CV_ADJUSTED, ORACLE, LRT)

KNOWN = "known"
DIFFERENCE = "difference"
LOCAL_BLOCK = "local_block"
VARIANCE_MODES = (KNOWN, DIFFERENCE, LOCAL_BLOCK)

# default critical values for the oracle-length overlay (quantiles of the
# derivative-scaled error at delta = 0.05)
ORACLE_CRITICAL = {1: 1.9964, 2: 1.85, 3: 1.78}


@dataclass
class ExperimentConfig:
    """One experiment, deserialised from a single JSON document."""

    model: str = REGRESSION
    grid: list = field(default_factory=lambda: [100])
    truth: object = "x1"
    sigma: float = 1.0
    B: int = 1000
    delta: float = 0.05
    c: float | None = None
    methods: list = field(default_factory=lambda: [PIVOTAL])
    variance_modes: list = field(default_factory=lambda: [KNOWN])
    seed: int = 0
    points: object = "all"
    inner: list | None = None
    workers: int = 1
    x0: list | None = None
    n_list: list | None = None
    lengths: bool = True
    lrt_crit: float = DEFAULT_LRT_CRITICAL
    region: list | None = None
    under_threshold: float = 0.93
    cv_inner_B: int = 1000
    n: int | None = None
    family: str = "poisson"
    model_params: dict = field(default_factory=dict)
    c_oracle: float | None = None

    @staticmethod
    def from_json(path_or_text) -> "ExperimentConfig":
        text = path_or_text
        if not str(path_or_text).lstrip().startswith("{"):
            with open(path_or_text) as fh:
                text = fh.read()
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: line {exc.lineno}: {exc.msg}")
        known = {f.name for f in fields(ExperimentConfig)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        cfg = ExperimentConfig(**doc)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.model not in MODELS:
            raise ConfigError(f"model must be one of {MODELS}, got {self.model!r}")
        if self.B < 1:
            raise ConfigError("field B: must be >= 1")
        if not 0 < self.delta < 1:
            raise ConfigError("field delta: must lie in (0, 1)")
        if self.sigma < 0:
            raise ConfigError("field sigma: must be nonnegative")
        for m in self.methods:
            if m not in METHODS:
                raise ConfigError(f"field methods: unknown method {m!r}")
        for v in self.variance_modes:
            if v not in VARIANCE_MODES:
                raise ConfigError(f"field variance_modes: unknown mode {v!r}")
        if self.model == REGRESSION:
            if not self.grid or any(int(n) < 1 for n in self.grid):
                raise ConfigError("field grid: per-axis sizes must be positive")
            if len(self.grid) > 3 and self.points == "all":
                raise ConfigError("field grid: d > 3 requires an explicit point list")
        if self.workers < 1:
            raise ConfigError("field workers: must be >= 1")
        if CV_ADJUSTED in self.methods and self.cv_inner_B < 1000:
            raise ConfigError("field cv_inner_B: adjustment needs >= 1000 replications")
        if self.inner is not None and self.inner != "preset":
            if len(self.inner) != len(self.grid):
                raise ConfigError("field inner: one [lo, hi] index range per axis")
            for rng_ in self.inner:
                if len(rng_) != 2 or rng_[0] > rng_[1]:
                    raise ConfigError("field inner: ranges are 1-based [lo, hi] pairs")

    def critical_value(self, d: int) -> float:
        if self.c is not None:
            return float(self.c)
        return default_critical_values().value(d, self.delta)


@dataclass
class CoverageReport:
    """Per-point coverage and length statistics plus global summaries."""

    points: np.ndarray            # (m, d) coordinates
    point_index: np.ndarray       # (m,) flat indices into the design
    keys: list                    # "method[variance]" labels, fixed order
    coverage: dict                # key -> (m,) proportions
    length_mean: dict
    length_median: dict
    length_q1: dict
    length_q3: dict
    failures: dict                # key -> (m,) ints
    summary: dict                 # key -> {mean, median, sd}
    inner_mask: np.ndarray | None
    meta: dict

    def to_csv(self, path) -> None:
        cols = [
            "point_index", "x1", "x2", "x3", "method", "variance",
            "coverage", "len_mean", "len_median", "len_q1", "len_q3", "failures",
        ]
        with open(path, "w", newline="") as fh:
            fh.write(",".join(cols) + "\n")
            d = self.points.shape[1]
            for key in self.keys:
                method, variance = _split_key(key)
                for i in range(len(self.point_index)):
                    coords = [f"{self.points[i, k]:.10g}" for k in range(d)]
                    coords += [""] * (3 - d)
                    row = [str(int(self.point_index[i]))] + coords + [method, variance]
                    row.append(f"{self.coverage[key][i]:.10g}")
                    for stat in (self.length_mean, self.length_median, self.length_q1, self.length_q3):
                        row.append(f"{stat[key][i]:.10g}")
                    row.append(str(int(self.failures[key][i])))
                    fh.write(",".join(row) + "\n")

    def write_meta(self, path, cfg: ExperimentConfig, elapsed: float) -> None:
        doc = {
            "schema_version": SCHEMA_VERSION,
            "seed": cfg.seed,
            "config": cfg.__dict__,
            "versions": {"isoci": __version__, "numpy": np.__version__},
            "elapsed_seconds": round(elapsed, 3),
            "summary": self.summary,
            "meta": self.meta,
        }
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True, default=str)
            fh.write("\n")


def _split_key(key: str) -> tuple[str, str]:
    if "[" in key:
        method, variance = key[:-1].split("[")
        return method, variance
    return key, ""


def _make_key(method: str, variance: str | None) -> str:
    return f"{method}[{variance}]" if variance else method


def _summarise(cov: np.ndarray) -> dict:
    return {
        "mean": float(np.mean(cov)),
        "median": float(np.median(cov)),
        "sd": float(np.std(cov, ddof=1)) if len(cov) > 1 else 0.0,
    }


# -- regression machinery ---------------------------------------------------


def _eval_points(cfg: ExperimentConfig, grid: DesignGrid) -> np.ndarray:
    total = grid.npoints
    if cfg.points == "all":
        return np.arange(total)
    idx = np.asarray(cfg.points, dtype=np.int64)
    if np.any(idx < 0) or np.any(idx >= total):
        raise ConfigError("field points: index out of range")
    return idx


def _preset_inner(shape) -> list:
    """Published inner regions: 17x17 of 25x25, 5^3 of 9^3; else trim n/6."""
    out = []
    for n in shape:
        if n == 25:
            trim = 4
        elif n == 9:
            trim = 2
        else:
            trim = int(math.ceil(n / 6.0))
        out.append([trim + 1, n - trim])
    return out


def _inner_mask(cfg: ExperimentConfig, grid: DesignGrid, eval_idx: np.ndarray):
    if cfg.inner is None:
        return None
    inner = _preset_inner(grid.shape) if cfg.inner == "preset" else cfg.inner
    shape = grid.shape
    multi = np.unravel_index(eval_idx, shape)
    mask = np.ones(len(eval_idx), dtype=bool)
    for k, (lo, hi) in enumerate(inner):
        mask &= (multi[k] >= lo - 1) & (multi[k] <= hi - 1)
    return mask


@dataclass(frozen=True)
class _RegressionTask:
    """Picklable per-replication workload for the regression models."""

    shape: tuple
    f0: np.ndarray
    truth_at_points: np.ndarray
    eval_idx: np.ndarray
    sigma: float
    seed: int
    keys: tuple
    c_by_key: dict
    lrt_threshold_known: float | None
    lengths: bool
    cv_delta: float | None = None
    cv_inner_B: int = 1000
    oracle_hw: np.ndarray | None = None


def _d1_point_stats(y: np.ndarray, eval_idx: np.ndarray):
    fit, starts = _kernels.pava_blocks(y, np.ones_like(y))
    block = np.searchsorted(starts, eval_idx, side="right") - 1
    counts = starts[block + 1] - starts[block]
    centers = fit[eval_idx]
    return centers, centers, counts.astype(float), counts.astype(float)


def _lattice_point_stats(y: np.ndarray, eval_idx: np.ndarray):
    shape = y.shape
    d = y.ndim
    if d == 1:
        return _d1_point_stats(y, eval_idx)
    multi = np.unravel_index(eval_idx, shape)
    m = len(eval_idx)
    avg = np.empty(m)
    maxmin = np.empty(m)
    n_uv = np.empty(m)
    n_minus = np.empty(m)
    if d == 2:
        n1, n2 = shape
        pref = np.zeros((n1 + 1, n2 + 1))
        pref[1:, 1:] = y.cumsum(0).cumsum(1)
        for t in range(m):
            i0, j0 = multi[0][t], multi[1][t]
            r = _kernels.fit_point_2d(pref, n1, n2, i0 + 1, j0 + 1, i0, j0)
            maxmin[t] = r[0]
            avg[t] = (r[0] + r[1]) / 2.0
            n_uv[t] = (r[6] - r[2] + 1) * (r[7] - r[3] + 1)
            n_minus[t] = (r[4] - r[2] + 1) * (r[5] - r[3] + 1)
    elif d == 3:
        n1, n2, n3 = shape
        pref = np.zeros((n1 + 1, n2 + 1, n3 + 1))
        pref[1:, 1:, 1:] = y.cumsum(0).cumsum(1).cumsum(2)
        for t in range(m):
            i0, j0, k0 = multi[0][t], multi[1][t], multi[2][t]
            r = _kernels.fit_point_3d(
                pref, n1, n2, n3, i0 + 1, j0 + 1, k0 + 1, i0, j0, k0
            )
            maxmin[t] = r[0]
            avg[t] = (r[0] + r[1]) / 2.0
            n_uv[t] = (r[8] - r[2] + 1) * (r[9] - r[3] + 1) * (r[10] - r[4] + 1)
            n_minus[t] = (r[5] - r[2] + 1) * (r[6] - r[3] + 1) * (r[7] - r[4] + 1)
    else:
        raise ConfigError("regression coverage supports lattice d <= 3")
    return avg, maxmin, n_uv, n_minus


def _regression_replicate(task: _RegressionTask, b: int):
    rng = replication_rng(task.seed, b)
    y = task.f0 + task.sigma * rng.standard_normal(task.shape)
    avg, maxmin, n_uv, n_minus = _lattice_point_stats(y, task.eval_idx)
    out_cover = {}
    out_length = {}
    sigma_by_mode = {}
    for key in task.keys:
        method, mode = _split_key(key)
        if method == LRT:
            continue
        if mode == KNOWN:
            sig = task.sigma
        elif mode == DIFFERENCE:
            if mode not in sigma_by_mode:
                sigma_by_mode[mode] = math.sqrt(
                    difference_variance(Sample(DesignGrid.regular_lattice(task.shape), y)).value
                )
            sig = sigma_by_mode[mode]
        else:  # local_block: per-point second moment inside [u, v]
            sig = None
        if method == ORACLE:
            hw = task.oracle_hw
            out_cover[key] = np.abs(avg - task.truth_at_points) <= hw
            out_length[key] = 2.0 * hw
            continue
        if method == PIVOTAL:
            center, count = avg, n_uv
        elif method == MAX_MIN_ONLY:
            center, count = maxmin, n_minus
        elif method == CV_ADJUSTED:
            center, count = avg, n_uv
        else:
            continue
        if sig is None:
            sig_arr = _local_sigma_per_point(y, task.eval_idx, avg)
        else:
            sig_arr = np.full(len(task.eval_idx), sig)
        if method == CV_ADJUSTED:
            c_arr = _cv_adjusted_c(task, b, y)
        else:
            c_arr = np.full(len(task.eval_idx), task.c_by_key[key])
        hw = c_arr * sig_arr / np.sqrt(count)
        out_cover[key] = np.abs(center - task.truth_at_points) <= hw
        out_length[key] = 2.0 * hw
    if task.lrt_threshold_known is not None:
        cover = np.empty(len(task.eval_idx), dtype=bool)
        length = np.zeros(len(task.eval_idx))
        sample = Sample(DesignGrid.regular_lattice(task.shape), y)
        axis = sample.grid.axes[0]
        for t, idx in enumerate(task.eval_idx):
            profile = LrtProfile(sample, float(axis[idx]))
            cover[t] = profile.stat(task.truth_at_points[t]) <= task.lrt_threshold_known
            if task.lengths:
                hi, _ = _lrt_bracket(profile, task.lrt_threshold_known, +1)
                lo, _ = _lrt_bracket(profile, task.lrt_threshold_known, -1)
                length[t] = hi - lo
        key = _make_key(LRT, KNOWN)
        out_cover[key] = cover
        out_length[key] = length
    return out_cover, out_length


def _local_sigma_per_point(y: np.ndarray, eval_idx: np.ndarray, centers: np.ndarray):
    """sqrt of the local-block variance, per evaluation point."""
    # re-derive block slices from the kernels; d = 1 uses level sets
    if y.ndim == 1:
        fit, starts = _kernels.pava_blocks(y, np.ones_like(y))
        block = np.searchsorted(starts, eval_idx, side="right") - 1
        out = np.empty(len(eval_idx))
        for t in range(len(eval_idx)):
            seg = y[starts[block[t]] : starts[block[t] + 1]]
            out[t] = math.sqrt(np.mean((seg - centers[t]) ** 2))
        return out
    multi = np.unravel_index(eval_idx, y.shape)
    out = np.empty(len(eval_idx))
    if y.ndim == 2:
        n1, n2 = y.shape
        pref = np.zeros((n1 + 1, n2 + 1))
        pref[1:, 1:] = y.cumsum(0).cumsum(1)
        for t in range(len(eval_idx)):
            i0, j0 = multi[0][t], multi[1][t]
            r = _kernels.fit_point_2d(pref, n1, n2, i0 + 1, j0 + 1, i0, j0)
            seg = y[r[2] : r[6] + 1, r[3] : r[7] + 1]
            out[t] = math.sqrt(np.mean((seg - centers[t]) ** 2))
        return out
    n1, n2, n3 = y.shape
    pref = np.zeros((n1 + 1, n2 + 1, n3 + 1))
    pref[1:, 1:, 1:] = y.cumsum(0).cumsum(1).cumsum(2)
    for t in range(len(eval_idx)):
        i0, j0, k0 = multi[0][t], multi[1][t], multi[2][t]
        r = _kernels.fit_point_3d(pref, n1, n2, n3, i0 + 1, j0 + 1, k0 + 1, i0, j0, k0)
        seg = y[r[2] : r[8] + 1, r[3] : r[9] + 1, r[4] : r[10] + 1]
        out[t] = math.sqrt(np.mean((seg - centers[t]) ** 2))
    return out


def _cv_adjusted_c(task: _RegressionTask, b: int, y: np.ndarray) -> np.ndarray:
    """Per-point critical values resimulated under the smooth proxy of y.

    The proxy and the matched noise scale depend only on the observed
    responses, so they are built once per replication and shared by the
    per-point resimulations.
    """
    from .ci import smooth_proxy
    from .simulate import PIVOT, SimConfig, simulate_pivot_quantile

    grid = DesignGrid.regular_lattice(task.shape)
    sample = Sample(grid, y)
    proxy = smooth_proxy(sample)
    sigma = math.sqrt(difference_variance(sample).value)
    pts = grid.points()
    out = np.empty(len(task.eval_idx))
    for t, idx in enumerate(task.eval_idx):
        inner_seed = int(np.random.SeedSequence([task.seed, b, int(idx)]).generate_state(1)[0])
        cfg = SimConfig(
            truth=proxy.y, grid=grid, x0=pts[idx], sigma=sigma,
            B=task.cv_inner_B, seed=inner_seed, statistic=PIVOT,
        )
        (est,) = simulate_pivot_quantile(cfg, [task.cv_delta])
        out[t] = est.c
    return out


def _run_replications(task: _RegressionTask, B: int, workers: int, keys: list):
    m = len(task.eval_idx)
    cover = {k: np.zeros((B, m), dtype=bool) for k in keys}
    length = {k: np.zeros((B, m)) for k in keys}

    def fill(lo, hi, results):
        for b, (cov_b, len_b) in zip(range(lo, hi), results):
            for k in keys:
                cover[k][b] = cov_b[k]
                length[k][b] = len_b[k]

    if workers <= 1:
        fill(0, B, (_regression_replicate(task, b) for b in range(B)))
    else:
        bounds = np.linspace(0, B, workers * 4 + 1).astype(int)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futs = [
                (int(lo), int(hi), pool.submit(_replicate_range, task, int(lo), int(hi)))
                for lo, hi in zip(bounds[:-1], bounds[1:])
                if hi > lo
            ]
            for lo, hi, fut in futs:
                fill(lo, hi, fut.result())
    return cover, length


def _replicate_range(task: _RegressionTask, lo: int, hi: int):
    return [_regression_replicate(task, b) for b in range(lo, hi)]


def _assemble_report(cfg, grid, eval_idx, keys, cover, length) -> CoverageReport:
    pts = grid.points()[eval_idx]
    coverage = {}
    lmean, lmed, lq1, lq3 = {}, {}, {}, {}
    failures = {}
    summary = {}
    for k in keys:
        cov = cover[k].mean(axis=0)
        coverage[k] = cov
        lens = length[k]
        lmean[k] = lens.mean(axis=0)
        lmed[k] = np.median(lens, axis=0)
        lq1[k] = np.quantile(lens, 0.25, axis=0)
        lq3[k] = np.quantile(lens, 0.75, axis=0)
        failures[k] = np.zeros(len(eval_idx), dtype=int)
        summary[k] = _summarise(cov)
    inner = _inner_mask(cfg, grid, eval_idx)
    meta = {}
    if inner is not None:
        for k in keys:
            meta[f"summary_inner::{k}"] = _summarise(coverage[k][inner])
            if np.any(~inner):
                meta[f"summary_outskirt::{k}"] = _summarise(coverage[k][~inner])
    return CoverageReport(
        points=pts,
        point_index=eval_idx,
        keys=keys,
        coverage=coverage,
        length_mean=lmean,
        length_median=lmed,
        length_q1=lq1,
        length_q3=lq3,
        failures=failures,
        summary=summary,
        inner_mask=inner,
        meta=meta,
    )


def _regression_task(cfg: ExperimentConfig, keys: list) -> tuple:
    grid = DesignGrid.regular_lattice(cfg.grid)
    expr = cfg.truth if isinstance(cfg.truth, Expression) else Expression(str(cfg.truth))
    f0 = expr(grid.points()).reshape(grid.shape)
    eval_idx = _eval_points(cfg, grid)
    d = grid.dim
    c_by_key = {}
    for key in keys:
        method, _ = _split_key(key)
        if method in (PIVOTAL, MAX_MIN_ONLY):
            c_by_key[key] = cfg.critical_value(d)
    lrt_threshold = None
    if any(_split_key(k)[0] == LRT for k in keys):
        if d != 1:
            raise ConfigError("likelihood-ratio comparison is univariate only")
        lrt_threshold = cfg.lrt_crit * cfg.sigma**2
    oracle_hw = None
    if any(_split_key(k)[0] == ORACLE for k in keys):
        from .ci import oracle_half_width

        c_oracle = cfg.c_oracle if cfg.c_oracle is not None else ORACLE_CRITICAL[d]
        pts = grid.points()[eval_idx]
        oracle_hw = np.empty(len(eval_idx))
        for t in range(len(eval_idx)):
            partials = expr.gradient(pts[t])
            if np.any(partials <= 0):
                raise ConfigError(
                    "oracle intervals need strictly positive partials at every point"
                )
            oracle_hw[t] = oracle_half_width(partials, cfg.sigma, grid.npoints, c_oracle)
    task = _RegressionTask(
        shape=grid.shape,
        f0=f0,
        truth_at_points=f0.ravel()[eval_idx],
        eval_idx=eval_idx,
        sigma=cfg.sigma,
        seed=cfg.seed,
        keys=tuple(keys),
        c_by_key=c_by_key,
        lrt_threshold_known=lrt_threshold,
        lengths=cfg.lengths,
        cv_delta=cfg.delta,
        cv_inner_B=cfg.cv_inner_B,
        oracle_hw=oracle_hw,
    )
    return grid, task, eval_idx


# -- public runners ---------------------------------------------------------


def run_coverage(cfg: ExperimentConfig) -> CoverageReport:
    """Coverage of the configured intervals at the configured points."""
    cfg.validate()
    start = time.time()
    if cfg.model != REGRESSION:
        report = _model_coverage(cfg)
        report.meta["elapsed_seconds"] = round(time.time() - start, 3)
        return report
    keys = [
        _make_key(m, v)
        for m in cfg.methods
        for v in cfg.variance_modes
        if m != LRT
    ]
    if LRT in cfg.methods:
        keys.append(_make_key(LRT, KNOWN))
    grid, task, eval_idx = _regression_task(cfg, keys)
    cover, length = _run_replications(task, cfg.B, cfg.workers, keys)
    report = _assemble_report(cfg, grid, eval_idx, keys, cover, length)
    report.meta["elapsed_seconds"] = round(time.time() - start, 3)
    return report


def run_estimator_comparison(cfg: ExperimentConfig) -> CoverageReport:
    """Block-average interval vs max-min-only interval on shared noise."""
    cfg = _with_methods(cfg, [PIVOTAL, MAX_MIN_ONLY])
    if len(cfg.grid) not in (2, 3):
        raise ConfigError("estimator comparison is for d in {2, 3}")
    report = run_coverage(cfg)
    for v in cfg.variance_modes:
        a = report.summary[_make_key(PIVOTAL, v)]
        b = report.summary[_make_key(MAX_MIN_ONLY, v)]
        report.meta[f"mean_coverage_gap::{v}"] = a["mean"] - b["mean"]
        report.meta[f"sd_coverage_gap::{v}"] = a["sd"] - b["sd"]
    return report


def run_bw_comparison(cfg: ExperimentConfig) -> CoverageReport:
    """Proposed pivotal interval vs likelihood-ratio interval, d = 1, known sigma."""
    if len(cfg.grid) != 1:
        raise ConfigError("likelihood-ratio comparison is univariate only")
    cfg = _with_methods(cfg, [PIVOTAL, LRT])
    cfg.variance_modes = [KNOWN]
    report = run_coverage(cfg)
    pk = _make_key(PIVOTAL, KNOWN)
    lk = _make_key(LRT, KNOWN)
    if cfg.region is not None:
        lo, hi = cfg.region
        mask = (report.points[:, 0] >= lo) & (report.points[:, 0] <= hi)
    else:
        mask = np.ones(len(report.point_index), dtype=bool)
    thr = cfg.under_threshold
    report.meta["undercover_count_pivotal"] = int(np.sum(report.coverage[pk][mask] < thr))
    report.meta["undercover_count_lrt"] = int(np.sum(report.coverage[lk][mask] < thr))
    report.meta["region"] = list(cfg.region) if cfg.region is not None else None
    report.meta["under_threshold"] = thr
    return report


def _with_methods(cfg: ExperimentConfig, methods: list) -> ExperimentConfig:
    cfg.methods = methods
    cfg.validate()
    return cfg


@dataclass
class LengthStudyReport:
    n_list: list
    quartiles: dict  # n -> {q1, median, q3, mean}
    oracle_lengths: dict  # n -> float
    slope: float
    meta: dict

    def to_csv(self, path) -> None:
        cols = ["n", "len_q1", "len_median", "len_q3", "len_mean", "oracle_length"]
        with open(path, "w", newline="") as fh:
            fh.write(",".join(cols) + "\n")
            for n in self.n_list:
                q = self.quartiles[n]
                fh.write(
                    ",".join(
                        [str(n)]
                        + [f"{q[s]:.10g}" for s in ("q1", "median", "q3", "mean")]
                        + [f"{self.oracle_lengths[n]:.10g}"]
                    )
                    + "\n"
                )


def run_length_study(cfg: ExperimentConfig, n_list=None) -> LengthStudyReport:
    """Interval length quartiles across sample sizes, with the oracle overlay.

    For each n a balanced lattice of n points is used; the slope of
    log(median length) against log n estimates the shrinkage rate.
    """
    if cfg.model != REGRESSION:
        raise ConfigError("length study applies to the regression model")
    n_list = list(n_list if n_list is not None else (cfg.n_list or []))
    if not n_list:
        raise ConfigError("field n_list: required for the length study")
    d = len(cfg.grid)
    x0 = np.asarray(cfg.x0 if cfg.x0 is not None else [0.5] * d, dtype=float)
    expr = cfg.truth if isinstance(cfg.truth, Expression) else Expression(str(cfg.truth))
    partials = expr.gradient(x0)
    if np.any(partials <= 0):
        raise ConfigError("length study needs strictly increasing truth at x0")
    c_oracle = cfg.c_oracle if cfg.c_oracle is not None else ORACLE_CRITICAL[d]
    c = cfg.critical_value(d)
    quartiles = {}
    oracle_lengths = {}
    for n in n_list:
        per_axis = round(n ** (1.0 / d))
        if per_axis**d != n:
            raise ConfigError(f"n = {n} is not a d-th power for a balanced lattice")
        grid_shape = [per_axis] * d
        grid = DesignGrid.regular_lattice(grid_shape)
        axis_idx = []
        for k, ax in enumerate(grid.axes):
            j = int(np.searchsorted(ax, x0[k]))
            if j >= len(ax) or ax[j] != x0[k]:
                raise ConfigError(f"x0 must be a design point for every n (n = {n})")
            axis_idx.append(j)
        flat = int(np.ravel_multi_index(axis_idx, grid.shape))
        sub = ExperimentConfig(**{**cfg.__dict__, "grid": grid_shape, "points": [flat],
                                  "methods": [PIVOTAL], "n_list": None})
        report = run_coverage(sub)
        key = _make_key(PIVOTAL, cfg.variance_modes[0])
        quartiles[n] = {
            "q1": float(report.length_q1[key][0]),
            "median": float(report.length_median[key][0]),
            "q3": float(report.length_q3[key][0]),
            "mean": float(report.length_mean[key][0]),
        }
        from .ci import oracle_half_width

        oracle_lengths[n] = 2.0 * oracle_half_width(partials, cfg.sigma, n, c_oracle)
    if len(n_list) >= 2 and all(quartiles[n]["median"] > 0 for n in n_list):
        logs_n = np.log(np.asarray(n_list, dtype=float))
        logs_len = np.log([quartiles[n]["median"] for n in n_list])
        slope = float(np.polyfit(logs_n, logs_len, 1)[0])
    else:
        slope = float("nan")
    return LengthStudyReport(
        n_list=n_list,
        quartiles=quartiles,
        oracle_lengths=oracle_lengths,
        slope=slope,
        meta={"c": c, "c_oracle": c_oracle, "partials": partials.tolist()},
    )


# -- non-regression models ---------------------------------------------------


def _one_model_replication(cfg: ExperimentConfig, params, t0, n, c, b):
    """One replication of a non-regression model: (interval, truth)."""
    rng = replication_rng(cfg.seed, b)
    level = 1 - cfg.delta
    if cfg.model == GRENANDER:
        rate = float(params.get("rate", 1.0))
        trunc = float(params.get("trunc", 3.0))
        u = rng.uniform(size=n)
        data = -np.log1p(-u * (1.0 - math.exp(-rate * trunc))) / rate
        truth = rate * math.exp(-rate * t0) / (1.0 - math.exp(-rate * trunc))
        return grenander_ci(data, t0, c, level=level), truth
    if cfg.model == CURRENT_STATUS:
        event = rng.uniform(size=n)
        inspect = rng.uniform(size=n)
        data = CurrentStatusData(inspect, (event <= inspect).astype(float))
        return current_status_ci(data, t0, c, level=level), t0
    if cfg.model == PANEL_COUNT:
        rate = float(params.get("rate", 2.0))
        k_obs = int(params.get("K", 2))
        tmax = float(params.get("tmax", 1.0))
        times = np.sort(rng.uniform(0.0, tmax, size=(n, k_obs)), axis=1)
        gaps = np.diff(np.concatenate([np.zeros((n, 1)), times], axis=1), axis=1)
        counts = np.cumsum(rng.poisson(rate * gaps), axis=1).astype(float)
        subjects = tuple((times[i], counts[i]) for i in range(n))
        return panel_count_ci(PanelCountData(subjects), t0, c, level=level), rate * t0
    if cfg.model == GLM:
        expr = cfg.truth if isinstance(cfg.truth, Expression) else Expression(str(cfg.truth))
        x = np.arange(1, n + 1) / n
        theta = expr(x[:, None])
        family = FAMILIES[cfg.family]
        if cfg.family == "poisson":
            y = rng.poisson(theta).astype(float)
        elif cfg.family == "bernoulli":
            y = (rng.uniform(size=n) < theta).astype(float)
        else:
            y = theta + rng.standard_normal(n)
        interval = glm_isotonic_ci(
            x, y, family, t0, c,
            variance_mode=params.get("variance_mode", "family"), level=level,
        )
        return interval, float(expr(np.array([[t0]]))[0])
    raise ConfigError(f"unsupported model {cfg.model!r}")


def _model_coverage(cfg: ExperimentConfig) -> CoverageReport:
    """Single-point coverage for the density/censoring/counting/GLM models."""
    params = dict(cfg.model_params)
    t0 = float((cfg.x0 or [0.5])[0])
    n = int(cfg.n or 500)
    c = cfg.c if cfg.c is not None else default_critical_values().value(1, cfg.delta)
    cover = np.zeros(cfg.B, dtype=bool)
    lengths = np.zeros(cfg.B)
    valid = np.ones(cfg.B, dtype=bool)
    truth = None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateBoundaryWarning)
        warnings.simplefilter("ignore", BoundaryVarianceWarning)
        for b in range(cfg.B):
            try:
                interval, truth = _one_model_replication(cfg, params, t0, n, c, b)
            except (NoFeasibleBlockError, OutOfSupportError, EmptySeriesError):
                valid[b] = False
                continue
            cover[b] = interval.covers(truth)
            lengths[b] = interval.length
    key = cfg.model
    failures = int((~valid).sum())
    cov = np.array([cover[valid].mean() if valid.any() else 0.0])
    lens = lengths[valid] if valid.any() else np.zeros(1)
    return CoverageReport(
        points=np.array([[t0]]),
        point_index=np.array([0]),
        keys=[key],
        coverage={key: cov},
        length_mean={key: np.array([lens.mean()])},
        length_median={key: np.array([np.median(lens)])},
        length_q1={key: np.array([np.quantile(lens, 0.25)])},
        length_q3={key: np.array([np.quantile(lens, 0.75)])},
        failures={key: np.array([failures])},
        summary={key: _summarise(cov)},
        inner_mask=None,
        meta={"truth": truth, "n": n},
    )
