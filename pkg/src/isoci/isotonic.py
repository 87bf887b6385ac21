"""Block max-min / min-max estimators and univariate isotonic regression.

The univariate path always routes through PAVA (O(n)); multivariate
lattice queries enumerate candidate corner pairs on design coordinates
against a summed-area table (O(1) per block mean, numba kernels for
d = 2, 3); scatter designs and d > 3 use a generic scan path.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .design import DesignGrid, Sample, build_tables, points_in_block
from .errors import EmptySeriesError, NoFeasibleBlockError

# cap on the temporary mean matrix used by the between-points 1-d path
_CHUNK_CELLS = 4_000_000


@dataclass(frozen=True)
class BlockFit:
    """Joint result of the block estimators at one query point.

    ``max_min`` and ``min_max`` are the two block estimates, ``average``
    their midpoint.  ``lower_corner`` comes from the max-min optimum and
    ``upper_corner`` from the min-max optimum; ``n_points`` counts the
    design points inside the closed block they span, which is the
    self-normaliser of the pivot statistic.
    """

    max_min: float
    min_max: float
    average: float
    lower_corner: np.ndarray
    upper_corner: np.ndarray
    n_points: int


@dataclass(frozen=True)
class WeightedSeries:
    """Sorted distinct positions with positive weights and local means."""

    positions: np.ndarray
    weights: np.ndarray
    means: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float).ravel()
        w = np.asarray(self.weights, dtype=float).ravel()
        m = np.asarray(self.means, dtype=float).ravel()
        if pos.size == 0:
            raise EmptySeriesError("weighted series needs at least one entry")
        if not (pos.size == w.size == m.size):
            raise ValueError("positions, weights and means must have equal length")
        if np.any(np.diff(pos) <= 0):
            raise ValueError("positions must be strictly increasing")
        if np.any(w <= 0):
            raise ValueError("weights must be strictly positive")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", m)

    def __len__(self) -> int:
        return len(self.positions)


def pava(values, weights=None) -> np.ndarray:
    """Weighted least-squares projection onto the nondecreasing cone.

    Parameters
    ----------
    values : array-like of shape (n,)
    weights : array-like of shape (n,), strictly positive; unit if None

    Returns
    -------
    ndarray of shape (n,), nondecreasing, with weighted means preserved
    on every pooled block.  Runs in O(n).
    """
    fit, _ = pava_with_blocks(values, weights)
    return fit


def pava_with_blocks(values, weights=None) -> tuple[np.ndarray, np.ndarray]:
    """Like :func:`pava` but also returns the b+1 block boundary indices."""
    y = np.ascontiguousarray(values, dtype=float)
    if y.ndim != 1:
        raise ValueError("values must be one-dimensional")
    if weights is None:
        w = np.ones_like(y)
    else:
        w = np.ascontiguousarray(weights, dtype=float)
        if w.shape != y.shape:
            raise ValueError(f"length mismatch: {len(y)} values vs {len(w)} weights")
        if np.any(w <= 0):
            raise ValueError("weights must be strictly positive")
    if y.size == 0:
        return y.copy(), np.zeros(1, dtype=np.int64)
    return _kernels.pava_blocks(y, w)


# -- univariate evaluation ----------------------------------------------


@dataclass(frozen=True)
class _SeriesFit:
    max_min: float
    min_max: float
    u_minus: int  # lower index of the max-min window
    v_minus: int  # upper index of the max-min window
    u_plus: int   # lower index of the min-max window
    v_plus: int   # upper index of the min-max window


def _series_fit(series: WeightedSeries, t0: float) -> _SeriesFit:
    pos, w, vals = series.positions, series.weights, series.means
    m = len(pos)
    if t0 < pos[0] or t0 > pos[-1]:
        raise NoFeasibleBlockError(
            f"query {t0} outside the data range [{pos[0]}, {pos[-1]}]"
        )
    k = int(np.searchsorted(pos, t0))
    if k < m and pos[k] == t0:
        fit, starts = _kernels.pava_blocks(vals, w)
        lo, hi = _kernels.level_set(starts, k)
        v = float(fit[k])
        return _SeriesFit(v, v, int(lo), int(hi), int(lo), int(hi))
    # strictly between positions k-1 and k: enumerate straddling windows
    cw = np.concatenate(([0.0], np.cumsum(w)))
    cm = np.concatenate(([0.0], np.cumsum(w * vals)))
    n_left, n_right = k, m - k
    best_rowmin = -np.inf
    u_minus = v_minus = 0
    colmax = np.full(n_right, -np.inf)
    colmax_u = np.zeros(n_right, dtype=np.int64)
    chunk = max(1, _CHUNK_CELLS // max(n_right, 1))
    right_den = cw[k + 1 :]
    right_num = cm[k + 1 :]
    for a0 in range(0, n_left, chunk):
        a1 = min(a0 + chunk, n_left)
        mat = (right_num[None, :] - cm[a0:a1, None]) / (right_den[None, :] - cw[a0:a1, None])
        rowmin = mat.min(axis=1)
        for i, a in enumerate(range(a0, a1)):
            if rowmin[i] >= best_rowmin:
                best_rowmin = rowmin[i]
                u_minus = a
                v_minus = k + int(np.argmin(mat[i]))
        newmax = mat.max(axis=0)
        upd = newmax >= colmax
        colmax = np.where(upd, newmax, colmax)
        # lexicographically largest attaining row within the chunk
        argrows = a0 + (a1 - a0 - 1) - np.argmax(mat[::-1], axis=0)
        colmax_u = np.where(upd, argrows, colmax_u)
    v_plus = int(np.argmin(colmax))
    min_max = float(colmax[v_plus])
    u_plus = int(colmax_u[v_plus])
    return _SeriesFit(float(best_rowmin), min_max, u_minus, v_minus, u_plus, k + v_plus)


def weighted_isotonic_max_min(series: WeightedSeries, t0: float):
    """Weighted max-min estimate at ``t0`` with its attaining window.

    Returns (value, u_hat, v_hat, window_weight): the estimate, the
    window endpoints (positions), and the total weight inside the
    closed window.
    """
    res = _series_fit(series, float(t0))
    pos, w = series.positions, series.weights
    lo, hi = res.u_minus, res.v_minus
    return res.max_min, float(pos[lo]), float(pos[hi]), float(w[lo : hi + 1].sum())


def _d1_series(sample: Sample) -> tuple[WeightedSeries, np.ndarray]:
    """Pool a 1-d sample by position; also return each point's series index."""
    if sample.grid.is_lattice:
        pos = sample.grid.axes[0]
        series = WeightedSeries(pos, np.ones(len(pos)), sample.y)
        return series, np.arange(len(pos))
    x = sample.grid.points_array[:, 0]
    order = np.argsort(x, kind="stable")
    xs, ys = x[order], sample.y[order]
    pos, start = np.unique(xs, return_index=True)
    counts = np.diff(np.append(start, len(xs)))
    sums = np.add.reduceat(ys, start)
    series = WeightedSeries(pos, counts.astype(float), sums / counts)
    idx = np.empty(len(x), dtype=np.int64)
    idx[order] = np.repeat(np.arange(len(pos)), counts)
    return series, idx


# -- multivariate lattice evaluation ------------------------------------


def _lattice_candidate_bounds(grid: DesignGrid, x0: np.ndarray) -> tuple[list[int], list[int]]:
    """Per-axis (iu, jv): number of lower candidates and first upper index."""
    iu, jv = [], []
    for k, ax in enumerate(grid.axes):
        iu.append(int(np.searchsorted(ax, x0[k], side="right")))
        jv.append(int(np.searchsorted(ax, x0[k], side="left")))
        if iu[-1] == 0 or jv[-1] == len(ax):
            raise NoFeasibleBlockError(
                f"no design coordinate on both sides of x0 along axis {k}"
            )
    return iu, jv


def _lattice_fit_indices(sample: Sample, x0: np.ndarray, prefix: np.ndarray | None = None):
    """Index-level fit at one lattice query: fast kernels for d = 2, 3."""
    grid = sample.grid
    iu, jv = _lattice_candidate_bounds(grid, x0)
    if prefix is None:
        prefix = build_tables(sample).prefix
    shape = grid.shape
    d = grid.dim
    if d == 2:
        r = _kernels.fit_point_2d(prefix, shape[0], shape[1], iu[0], iu[1], jv[0], jv[1])
        return (
            r[0],
            r[1],
            (r[2], r[3]),
            (r[4], r[5]),
            (r[8], r[9]),
            (r[6], r[7]),
        )
    if d == 3:
        r = _kernels.fit_point_3d(
            prefix, shape[0], shape[1], shape[2], iu[0], iu[1], iu[2], jv[0], jv[1], jv[2]
        )
        return (
            r[0],
            r[1],
            (r[2], r[3], r[4]),
            (r[5], r[6], r[7]),
            (r[11], r[12], r[13]),
            (r[8], r[9], r[10]),
        )
    return _generic_lattice_fit(prefix, shape, iu, jv)


def _generic_lattice_fit(prefix, shape, iu, jv, prefer_small_block=True):
    """Pure-python corner enumeration for lattices of any dimension."""
    d = len(shape)

    def mean_of(a, c):
        total = 0.0
        cnt = 1
        for corner in itertools.product(*(((a[k], -1), (c[k] + 1, +1)) for k in range(d))):
            idx = tuple(t[0] for t in corner)
            sign = 1
            for t in corner:
                sign *= t[1]
            total += sign * prefix[idx]
        for k in range(d):
            cnt *= c[k] - a[k] + 1
        return total / cnt

    u_range = list(itertools.product(*(range(iu[k]) for k in range(d))))
    v_range = list(itertools.product(*(range(jv[k], shape[k]) for k in range(d))))
    if not prefer_small_block:
        u_range = u_range[::-1]
        v_range = v_range[::-1]
    best = -np.inf
    u_minus = v_minus = None
    colmax = {}
    for a in u_range:
        inner = np.inf
        inner_v = None
        for c in v_range:
            mu = mean_of(a, c)
            if mu < inner:
                inner = mu
                inner_v = c
            key = c
            if key not in colmax or mu >= colmax[key][0]:
                colmax[key] = (mu, a)
        if inner >= best:
            best = inner
            u_minus, v_minus = a, inner_v
    min_max = np.inf
    v_plus = u_plus = None
    for c in v_range:
        mu, a = colmax[c]
        if mu < min_max:
            min_max = mu
            v_plus, u_plus = c, a
    return best, min_max, u_minus, v_minus, u_plus, v_plus


# -- scatter evaluation ---------------------------------------------------


def _scatter_fit(sample: Sample, x0: np.ndarray, prefer_small_block=True):
    """Corner enumeration over per-axis candidate values for scatter designs.

    O(n) per candidate pair; intended for the paper-scale random designs,
    not for large n with many distinct coordinates.
    """
    pts = sample.grid.points_array
    y = sample.y
    d = pts.shape[1]
    low_vals, up_vals = [], []
    for k in range(d):
        vals = np.unique(pts[:, k])
        lo = vals[vals <= x0[k]]
        hi = vals[vals >= x0[k]]
        if lo.size == 0 or hi.size == 0:
            raise NoFeasibleBlockError(
                f"no design coordinate on both sides of x0 along axis {k}"
            )
        low_vals.append(lo)
        up_vals.append(hi)
    ge = [{v: pts[:, k] >= v for v in low_vals[k]} for k in range(d)]
    le = [{v: pts[:, k] <= v for v in up_vals[k]} for k in range(d)]
    u_range = list(itertools.product(*low_vals))
    v_range = list(itertools.product(*up_vals))
    if not prefer_small_block:
        u_range = u_range[::-1]
        v_range = v_range[::-1]
    best = -np.inf
    u_minus = v_minus = None
    colmax = {}
    feasible = False
    for a in u_range:
        mask_u = ge[0][a[0]].copy()
        for k in range(1, d):
            mask_u &= ge[k][a[k]]
        inner = np.inf
        inner_v = None
        for c in v_range:
            mask = mask_u & le[0][c[0]]
            for k in range(1, d):
                mask &= le[k][c[k]]
            cnt = int(mask.sum())
            if cnt == 0:
                continue
            mu = float(y[mask].mean())
            if mu < inner:
                inner = mu
                inner_v = c
            if c not in colmax or mu >= colmax[c][0]:
                colmax[c] = (mu, a)
        if inner_v is None:
            continue
        feasible = True
        if inner >= best:
            best = inner
            u_minus, v_minus = a, inner_v
    if not feasible:
        raise NoFeasibleBlockError("every candidate block is empty")
    min_max = np.inf
    v_plus = u_plus = None
    for c in v_range:
        if c not in colmax:
            continue
        mu, a = colmax[c]
        if mu < min_max:
            min_max = mu
            v_plus, u_plus = c, a
    return best, min_max, u_minus, v_minus, u_plus, v_plus


# -- public operations -----------------------------------------------------


def block_max_min(sample: Sample, x0):
    """Block max-min estimate at ``x0``.

    Returns (value, lower_corner, inner_upper_corner): the chosen
    maximising lower corner and the upper corner of the block attaining
    the inner minimum.  Ties: lexicographically largest lower corner,
    lexicographically smallest inner corner.
    """
    value, _, u, v, _, _ = _fit_raw(sample, x0)
    return value, u, v


def block_min_max(sample: Sample, x0):
    """Block min-max estimate at ``x0``; mirror of :func:`block_max_min`."""
    _, value, _, _, u, v = _fit_raw(sample, x0)
    return value, v, u


def _fit_raw(sample: Sample, x0, prefix: np.ndarray | None = None, prefer_small_block=True):
    """(max_min, min_max, u-, v-, u+, v+) with corners as coordinate arrays."""
    grid = sample.grid
    x0 = grid.snap(x0)
    if grid.dim == 1:
        series, _ = _d1_series(sample)
        r = _series_fit(series, float(x0[0]))
        pos = series.positions
        return (
            r.max_min,
            r.min_max,
            np.array([pos[r.u_minus]]),
            np.array([pos[r.v_minus]]),
            np.array([pos[r.u_plus]]),
            np.array([pos[r.v_plus]]),
        )
    if grid.is_lattice:
        if grid.dim in (2, 3) and prefer_small_block:
            fm, fp, ui, mvi, upi, vi = _lattice_fit_indices(sample, x0, prefix)
        else:
            iu, jv = _lattice_candidate_bounds(grid, x0)
            if prefix is None:
                prefix = build_tables(sample).prefix
            fm, fp, ui, mvi, upi, vi = _generic_lattice_fit(
                prefix, grid.shape, iu, jv, prefer_small_block
            )
        axes = grid.axes

        def coord(idx):
            return np.array([axes[k][idx[k]] for k in range(grid.dim)])

        return fm, fp, coord(ui), coord(mvi), coord(upi), coord(vi)
    fm, fp, u, mv, up, v = _scatter_fit(sample, x0, prefer_small_block)
    return fm, fp, np.asarray(u, float), np.asarray(mv, float), np.asarray(up, float), np.asarray(v, float)


def block_fit(sample: Sample, x0, prefer_small_block: bool = True) -> BlockFit:
    """Both block estimators with the data-driven block at ``x0``.

    The lower corner is taken from the max-min optimum, the upper corner
    from the min-max optimum; each is tightened to the bounding box of
    the design points inside its own optimal rectangle (a no-op on
    lattices, where corners already sit on design coordinates).
    ``prefer_small_block=False`` flips every tie-break toward the larger
    block; it only matters for responses out of general position.
    """
    grid = sample.grid
    x0 = grid.snap(x0)
    fm, fp, u_minus, v_minus, u_plus, v_plus = _fit_raw(
        sample, x0, prefer_small_block=prefer_small_block
    )
    lo_m, _, _ = points_in_block(grid, u_minus, v_minus)
    _, hi_p, _ = points_in_block(grid, u_plus, v_plus)
    lower = np.minimum(lo_m, x0)
    upper = np.maximum(hi_p, x0)
    _, _, n_points = points_in_block(grid, lower, upper)
    return BlockFit(
        max_min=float(fm),
        min_max=float(fp),
        average=(float(fm) + float(fp)) / 2.0,
        lower_corner=lower,
        upper_corner=upper,
        n_points=int(n_points),
    )


def fit_at_design_points(sample: Sample):
    """Evaluate the block estimators at every design point.

    Returns (max_min, min_max, average) arrays shaped like ``sample.y``.
    In d = 1 both estimators coincide with the weighted PAVA fit.
    """
    grid = sample.grid
    if grid.dim == 1:
        series, idx = _d1_series(sample)
        fit, _ = _kernels.pava_blocks(series.means, series.weights)
        vals = fit[idx].reshape(sample.y.shape)
        return vals.copy(), vals.copy(), vals.copy()
    if grid.is_lattice and grid.dim == 2:
        prefix = build_tables(sample).prefix
        fm, fp, *_ = _kernels.fit_all_2d(prefix, *grid.shape)
        return fm, fp, (fm + fp) / 2.0
    if grid.is_lattice and grid.dim == 3:
        prefix = build_tables(sample).prefix
        fm, fp, *_ = _kernels.fit_all_3d(prefix, *grid.shape)
        return fm, fp, (fm + fp) / 2.0
    pts = grid.points() if grid.is_lattice else grid.points_array
    fm = np.empty(len(pts))
    fp = np.empty(len(pts))
    prefix = build_tables(sample).prefix if grid.is_lattice else None
    for i, p in enumerate(pts):
        res = _fit_raw(sample, p, prefix=prefix)
        fm[i], fp[i] = res[0], res[1]
    fm = fm.reshape(sample.y.shape)
    fp = fp.reshape(sample.y.shape)
    return fm, fp, (fm + fp) / 2.0


def max_min_block_count(sample: Sample, x0) -> tuple[float, int]:
    """Max-min estimate and the point count of its own optimal rectangle."""
    value, u, v = block_max_min(sample, x0)
    _, _, count = points_in_block(sample.grid, u, v)
    return value, count
