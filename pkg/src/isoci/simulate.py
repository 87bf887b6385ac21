"""Monte Carlo engine for critical values.

Simulates the self-normalised pivot sqrt(n_block) * |fit - truth| / sigma
(or the derivative-scaled error used by the oracle interval) under a
known monotone truth on a fixed design, and extracts empirical
quantiles.  Every replication draws from its own counter-based stream
derived from (seed, replication index), so results are bit-identical
for any worker count and execution order.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .design import DesignGrid, Sample
from .errors import NoFeasibleBlockError, SimulationFailureError
from .isotonic import block_fit

PIVOT = "pivot"
SCALED_ERROR = "scaled_error"

# abort when more than this fraction of replications fails
FAILURE_TOLERANCE = 1e-3


@dataclass(frozen=True)
class SimConfig:
    """One simulation problem: truth, design, query point and noise scale.

    ``truth`` is either a callable mapping an (m, d) array of points to
    m values, or an array of truth values shaped like the design.  The
    design must contain ``x0``.
    """

    truth: object
    grid: DesignGrid
    x0: np.ndarray
    sigma: float
    B: int
    seed: int
    statistic: str = PIVOT

    def __post_init__(self):
        if self.B < 1:
            raise ValueError("B must be at least 1")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if self.statistic not in (PIVOT, SCALED_ERROR):
            raise ValueError(f"unknown statistic {self.statistic!r}")
        object.__setattr__(self, "x0", np.atleast_1d(np.asarray(self.x0, dtype=float)))


@dataclass(frozen=True)
class QuantileEstimate:
    delta: float
    c: float
    stderr: float
    B_used: int


def replication_rng(seed: int, b: int) -> np.random.Generator:
    """Independent, order-free stream for replication ``b`` of run ``seed``."""
    return np.random.default_rng([int(seed), int(b)])


@dataclass(frozen=True)
class _SimTask:
    """Fully tabulated, picklable unit of work."""

    kind: str  # "d1" | "lat2" | "lat3" | "generic"
    f0: np.ndarray
    f0_x0: float
    sigma: float
    seed: int
    scale: float  # pivot: unused; scaled error: (n/sigma^2)^(1/(d+2)) / K
    statistic: str
    x0: np.ndarray
    axes: tuple | None
    points: np.ndarray | None
    idx: tuple  # d1: (i0,); lattices: (iu..., jv...)


def _tabulate_truth(cfg: SimConfig) -> np.ndarray:
    grid = cfg.grid
    if callable(cfg.truth):
        pts = grid.points() if grid.is_lattice else grid.points_array
        vals = np.asarray(cfg.truth(pts), dtype=float).ravel()
        shape = grid.shape if grid.is_lattice else (grid.npoints,)
        return vals.reshape(shape)
    vals = np.asarray(cfg.truth, dtype=float)
    if grid.is_lattice:
        return vals.reshape(grid.shape)
    return vals.reshape((grid.npoints,))


def _prepare(cfg: SimConfig, scale: float = 1.0) -> _SimTask:
    grid = cfg.grid
    x0 = grid.snap(cfg.x0)
    f0 = _tabulate_truth(cfg)
    if grid.is_lattice:
        pos = []
        for k, ax in enumerate(grid.axes):
            j = int(np.searchsorted(ax, x0[k]))
            if j >= len(ax) or ax[j] != x0[k]:
                raise ValueError("the design must contain x0 for pivot simulation")
            pos.append(j)
        f0_x0 = float(f0[tuple(pos)])
        if grid.dim == 1:
            return _SimTask(
                "d1", f0, f0_x0, cfg.sigma, cfg.seed, scale, cfg.statistic, x0,
                tuple(grid.axes), None, (pos[0],),
            )
        if grid.dim in (2, 3):
            iu = tuple(p + 1 for p in pos)
            jv = tuple(pos)
            return _SimTask(
                "lat2" if grid.dim == 2 else "lat3",
                f0, f0_x0, cfg.sigma, cfg.seed, scale, cfg.statistic, x0,
                tuple(grid.axes), None, iu + jv,
            )
        return _SimTask(
            "generic", f0, f0_x0, cfg.sigma, cfg.seed, scale, cfg.statistic, x0,
            tuple(grid.axes), None, (),
        )
    pts = grid.points_array
    hit = np.where(np.all(pts == x0, axis=1))[0]
    if hit.size == 0:
        raise ValueError("the design must contain x0 for pivot simulation")
    return _SimTask(
        "generic", f0, float(f0[hit[0]]), cfg.sigma, cfg.seed, scale, cfg.statistic,
        x0, None, pts, (),
    )


def _statistic(task: _SimTask, estimate: float, n_block: int) -> float:
    if task.sigma == 0.0:
        return 0.0
    err = abs(estimate - task.f0_x0)
    if task.statistic == PIVOT:
        return math.sqrt(n_block) * err / task.sigma
    return task.scale * err


def _replicate(task: _SimTask, b: int) -> float:
    rng = replication_rng(task.seed, b)
    noise = rng.standard_normal(task.f0.shape)
    y = task.f0 + task.sigma * noise
    if task.kind == "d1":
        (i0,) = task.idx
        fit, starts = _kernels.pava_blocks(y, np.ones_like(y))
        lo, hi = _kernels.level_set(starts, i0)
        return _statistic(task, float(fit[i0]), int(hi - lo + 1))
    if task.kind == "lat2":
        iu1, iu2, jv1, jv2 = task.idx
        n1, n2 = y.shape
        pref = np.zeros((n1 + 1, n2 + 1))
        pref[1:, 1:] = y.cumsum(0).cumsum(1)
        r = _kernels.fit_point_2d(pref, n1, n2, iu1, iu2, jv1, jv2)
        n_block = (r[6] - r[2] + 1) * (r[7] - r[3] + 1)
        return _statistic(task, (r[0] + r[1]) / 2.0, int(n_block))
    if task.kind == "lat3":
        iu1, iu2, iu3, jv1, jv2, jv3 = task.idx
        n1, n2, n3 = y.shape
        pref = np.zeros((n1 + 1, n2 + 1, n3 + 1))
        pref[1:, 1:, 1:] = y.cumsum(0).cumsum(1).cumsum(2)
        r = _kernels.fit_point_3d(pref, n1, n2, n3, iu1, iu2, iu3, jv1, jv2, jv3)
        n_block = (r[8] - r[2] + 1) * (r[9] - r[3] + 1) * (r[10] - r[4] + 1)
        return _statistic(task, (r[0] + r[1]) / 2.0, int(n_block))
    # generic fallback: rebuild a Sample and use the API path
    if task.axes is not None:
        grid = DesignGrid.lattice(task.axes)
    else:
        grid = DesignGrid.scatter(task.points)
    fit = block_fit(Sample(grid, y), task.x0)
    return _statistic(task, fit.average, fit.n_points)


def run_replication(cfg: SimConfig, b: int) -> float:
    """Statistic of replication ``b``; a pure function of (cfg, b)."""
    if not 0 <= b < cfg.B:
        raise ValueError("replication index out of range")
    return _replicate(_prepare(cfg), b)


def _run_chunk(task: _SimTask, lo: int, hi: int) -> np.ndarray:
    out = np.empty(hi - lo)
    for b in range(lo, hi):
        try:
            out[b - lo] = _replicate(task, b)
        except NoFeasibleBlockError:
            out[b - lo] = np.nan
    return out


def _simulate(task: _SimTask, B: int, workers: int) -> np.ndarray:
    if workers <= 1:
        stats = _run_chunk(task, 0, B)
    else:
        n_chunks = workers * 4
        bounds = np.linspace(0, B, n_chunks + 1).astype(int)
        stats = np.empty(B)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futs = [
                (lo, hi, pool.submit(_run_chunk, task, int(lo), int(hi)))
                for lo, hi in zip(bounds[:-1], bounds[1:])
                if hi > lo
            ]
            for lo, hi, fut in futs:
                stats[lo:hi] = fut.result()
    failures = int(np.isnan(stats).sum())
    if failures > FAILURE_TOLERANCE * B:
        raise SimulationFailureError(
            f"{failures} of {B} replications failed to produce a statistic"
        )
    return np.sort(stats[~np.isnan(stats)])


def empirical_quantiles(sorted_stats: np.ndarray, deltas) -> list[QuantileEstimate]:
    """Upper-tail order-statistic quantiles with order-statistic stderr.

    The (1 - delta) quantile is the order statistic at index
    ceil((1 - delta) * B); the standard error is half the spread of the
    order statistics one binomial standard deviation away in rank.
    """
    B = len(sorted_stats)
    out = []
    for delta in deltas:
        if not 0 < delta <= 1:
            raise ValueError("delta must lie in (0, 1]")
        k = math.ceil((1.0 - delta) * B)
        c = float(sorted_stats[max(k, 1) - 1])
        m = max(1, math.ceil(math.sqrt(B * delta * (1.0 - delta))))
        lo = float(sorted_stats[max(k - m, 1) - 1])
        hi = float(sorted_stats[min(k + m, B) - 1])
        out.append(QuantileEstimate(delta=delta, c=c, stderr=(hi - lo) / 2.0, B_used=B))
    return out


def simulate_pivot_quantile(
    cfg: SimConfig, deltas, workers: int = 1
) -> list[QuantileEstimate]:
    """Empirical (1 - delta) quantiles of the pivot under ``cfg``."""
    if cfg.statistic != PIVOT:
        raise ValueError("config statistic must be 'pivot'")
    stats = _simulate(_prepare(cfg), cfg.B, workers)
    return empirical_quantiles(stats, deltas)


def simulate_D_quantile(
    cfg: SimConfig, partials, deltas, workers: int = 1
) -> list[QuantileEstimate]:
    """Quantiles of the derivative-scaled absolute error.

    The statistic is (n / sigma^2)^(1/(d+2)) |fit - truth| divided by
    prod(partials/2)^(1/(d+2)); its 1 - delta quantiles calibrate the
    oracle interval.
    """
    if cfg.statistic != SCALED_ERROR:
        raise ValueError("config statistic must be 'scaled_error'")
    partials = np.atleast_1d(np.asarray(partials, dtype=float))
    if np.any(partials <= 0):
        raise ValueError("partials must be strictly positive")
    d = cfg.grid.dim
    if len(partials) != d:
        raise ValueError("one partial derivative per dimension required")
    n = cfg.grid.npoints
    if cfg.sigma == 0:
        scale = 0.0
    else:
        K = float(np.prod(partials / 2.0)) ** (1.0 / (d + 2))
        scale = (n / cfg.sigma**2) ** (1.0 / (d + 2)) / K
    stats = _simulate(_prepare(cfg, scale=scale), cfg.B, workers)
    return empirical_quantiles(stats, deltas)
