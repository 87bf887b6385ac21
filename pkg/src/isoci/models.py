"""Pointwise intervals in other monotone models.

All four models share one scheme: a piecewise-constant monotone
estimator whose data-driven window around the query point self-
normalises the pivot, so the interval needs only the fitted value, the
window, and an easy plug-in for the local noise scale.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .ci import ConfidenceInterval, symmetric_interval
from .errors import (
    BoundaryVarianceWarning,
    DegenerateBoundaryWarning,
    OutOfSupportError,
)
from .isotonic import WeightedSeries, weighted_isotonic_max_min

GRENANDER = "grenander"
CURRENT_STATUS = "current_status"
PANEL_COUNT = "panel_count"
GLM = "glm"

FAMILY = "family"
LOCAL_BLOCK = "local_block"


# -- monotone density ------------------------------------------------------


@dataclass(frozen=True)
class GrenanderFit:
    """Least concave majorant of the empirical CDF, queried at one point.

    ``knots``/``heights`` describe the majorant (starting at (0, 0) and
    ending at (max sample, 1)); ``slopes[j]`` is the fitted density on
    (knots[j], knots[j+1]].  ``value`` is the left derivative at the
    query, ``u_hat``/``v_hat`` the knots bracketing it.
    """

    knots: np.ndarray
    heights: np.ndarray
    slopes: np.ndarray
    x0: float
    value: float
    u_hat: float
    v_hat: float


def grenander_fit(data, x0: float) -> GrenanderFit:
    """Decreasing-density MLE at ``x0`` from nonnegative observations."""
    data = np.asarray(data, dtype=float).ravel()
    if data.size < 2:
        raise ValueError("need at least two observations")
    if np.any(data <= 0):
        raise ValueError("observations must be strictly positive")
    xs = np.sort(data)
    n = xs.size
    # ECDF jump points with final heights (duplicates collapse to one point)
    ux, last = np.unique(xs, return_index=True)
    counts = np.diff(np.append(last, n))
    heights = np.cumsum(counts) / n
    px = np.concatenate(([0.0], ux))
    py = np.concatenate(([0.0], heights))
    if not 0.0 < x0 <= px[-1]:
        raise OutOfSupportError(f"x0 must lie in (0, {px[-1]}]")
    # upper concave hull via a monotone stack (slopes strictly decreasing)
    hull = [0, 1]
    for i in range(2, len(px)):
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            if (py[b] - py[a]) * (px[i] - px[a]) <= (py[i] - py[a]) * (px[b] - px[a]):
                hull.pop()
            else:
                break
        hull.append(i)
    knots = px[hull]
    hts = py[hull]
    slopes = np.diff(hts) / np.diff(knots)
    j = int(np.searchsorted(knots, x0, side="left"))
    j = max(j, 1)
    return GrenanderFit(
        knots=knots,
        heights=hts,
        slopes=slopes,
        x0=float(x0),
        value=float(slopes[j - 1]),
        u_hat=float(knots[j - 1]),
        v_hat=float(knots[j]),
    )


def grenander_ci(data, x0: float, c: float, level: float = 0.95) -> ConfidenceInterval:
    """Interval for a decreasing density at ``x0``, clipped to [0, inf)."""
    fit = grenander_fit(data, x0)
    n = np.asarray(data).size
    hw = c * math.sqrt(max(fit.value, 0.0)) / math.sqrt(n * (fit.v_hat - fit.u_hat))
    return symmetric_interval(fit.value, hw, level, GRENANDER, clip=(0.0, math.inf))


# -- current status --------------------------------------------------------


@dataclass(frozen=True)
class CurrentStatusData:
    """Inspection times with censoring indicators 1{event time <= T_i}."""

    times: np.ndarray
    indicators: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float).ravel()
        d = np.asarray(self.indicators, dtype=float).ravel()
        if t.size != d.size:
            raise ValueError("times and indicators must have equal length")
        if not np.all((d == 0) | (d == 1)):
            raise ValueError("indicators must be 0 or 1")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "indicators", d)


def _pooled_series(positions: np.ndarray, values: np.ndarray) -> WeightedSeries:
    order = np.argsort(positions, kind="stable")
    xs, vs = positions[order], values[order]
    pos, start = np.unique(xs, return_index=True)
    counts = np.diff(np.append(start, len(xs))).astype(float)
    sums = np.add.reduceat(vs, start)
    return WeightedSeries(pos, counts, sums / counts)


def current_status_ci(
    data: CurrentStatusData, t0: float, c: float, level: float = 0.95
) -> ConfidenceInterval:
    """Interval for the event-time CDF at ``t0``, clipped to [0, 1].

    The CDF estimate is the isotonic regression of the indicators in
    time order; the half-width uses the simplified display in which the
    inspection-density plug-in cancels against the window length,
    leaving the raw count of inspection times inside the window.
    """
    series = _pooled_series(data.times, data.indicators)
    value, u_hat, v_hat, n_window = weighted_isotonic_max_min(series, t0)
    flag = None
    if value in (0.0, 1.0):
        flag = "degenerate_boundary"
        warnings.warn(
            "CDF estimate sits at a boundary; interval collapses to a point",
            DegenerateBoundaryWarning,
            stacklevel=2,
        )
    hw = c * math.sqrt(max(value * (1.0 - value), 0.0)) / math.sqrt(n_window)
    return symmetric_interval(value, hw, level, CURRENT_STATUS, clip=(0.0, 1.0), flag=flag)


# -- panel count -----------------------------------------------------------


@dataclass(frozen=True)
class PanelCountData:
    """Per-subject observation times and cumulative event counts."""

    subjects: tuple

    def __post_init__(self):
        cleaned = []
        for times, counts in self.subjects:
            t = np.asarray(times, dtype=float).ravel()
            m = np.asarray(counts, dtype=float).ravel()
            if t.size != m.size or t.size == 0:
                raise ValueError("each subject needs matching nonempty times and counts")
            if np.any(np.diff(t) < 0):
                raise ValueError("observation times must be nondecreasing within subject")
            if np.any(m < 0) or np.any(m != np.round(m)):
                raise ValueError("counts must be nonnegative integers")
            cleaned.append((t, m))
        object.__setattr__(self, "subjects", tuple(cleaned))

    @staticmethod
    def from_long(subject_ids, times, counts) -> "PanelCountData":
        subject_ids = np.asarray(subject_ids)
        times = np.asarray(times, dtype=float)
        counts = np.asarray(counts, dtype=float)
        subjects = []
        for sid in np.unique(subject_ids):
            mask = subject_ids == sid
            order = np.argsort(times[mask], kind="stable")
            subjects.append((times[mask][order], counts[mask][order]))
        return PanelCountData(tuple(subjects))

    def pooled(self) -> tuple[np.ndarray, np.ndarray]:
        times = np.concatenate([t for t, _ in self.subjects])
        counts = np.concatenate([m for _, m in self.subjects])
        return times, counts


def panel_count_series(data: PanelCountData) -> WeightedSeries:
    """Distinct observation times with multiplicities and mean counts."""
    times, counts = data.pooled()
    return _pooled_series(times, counts)


def panel_count_ci(
    data: PanelCountData, t0: float, c: float, level: float = 0.95
) -> ConfidenceInterval:
    """Interval for the mean cumulative count at ``t0``, clipped to [0, inf).

    The estimate is the weighted isotonic regression of the pooled mean
    counts; the window count includes every observation-time pair with
    multiplicity, and the local variance is the second moment of the
    counts inside the window about the fitted value.
    """
    series = panel_count_series(data)
    value, u_hat, v_hat, n_window = weighted_isotonic_max_min(series, t0)
    times, counts = data.pooled()
    in_window = (times >= u_hat) & (times <= v_hat)
    sigma2 = float(((counts[in_window] - value) ** 2).mean())
    hw = c * math.sqrt(sigma2) / math.sqrt(n_window)
    return symmetric_interval(value, hw, level, PANEL_COUNT, clip=(0.0, math.inf))


# -- isotonic GLM -----------------------------------------------------------


@dataclass(frozen=True)
class GlmFamily:
    """Mean-parametrised exponential family: name plus variance function."""

    name: str
    variance: Callable[[float], float]


GAUSSIAN = GlmFamily("gaussian", lambda theta: 1.0)
BERNOULLI = GlmFamily("bernoulli", lambda theta: theta * (1.0 - theta))
POISSON = GlmFamily("poisson", lambda theta: theta)

FAMILIES = {f.name: f for f in (GAUSSIAN, BERNOULLI, POISSON)}


def glm_isotonic_ci(
    x,
    y,
    family: GlmFamily,
    x0: float,
    c: float,
    variance_mode: str = FAMILY,
    level: float = 0.95,
) -> ConfidenceInterval:
    """Interval for a monotone GLM mean at ``x0``.

    The MLE under monotonicity is the isotonic regression of the
    responses; the half-width uses the family variance at the fitted
    value (``variance_mode="family"``) or the local second moment of the
    responses in the window (``"local_block"``).  Boundary fits with
    zero family variance yield a degenerate interval and a warning.
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.size != y.size:
        raise ValueError("x and y must have equal length")
    if np.any(np.diff(x) < 0):
        raise ValueError("x must be sorted nondecreasing")
    if variance_mode not in (FAMILY, LOCAL_BLOCK):
        raise ValueError("variance_mode must be 'family' or 'local_block'")
    series = _pooled_series(x, y)
    value, u_hat, v_hat, _ = weighted_isotonic_max_min(series, x0)
    in_window = (x >= u_hat) & (x <= v_hat)
    n_window = int(in_window.sum())
    flag = None
    if variance_mode == FAMILY:
        sigma2 = float(family.variance(value))
        if not math.isfinite(sigma2):
            raise ValueError(
                "family variance is not finite at the fitted value; "
                "use variance_mode='local_block'"
            )
        if sigma2 <= 0.0:
            flag = "boundary_variance"
            sigma2 = 0.0
            warnings.warn(
                f"{family.name} variance vanishes at the fitted value "
                f"{value}; interval is degenerate",
                BoundaryVarianceWarning,
                stacklevel=2,
            )
    else:
        sigma2 = float(((y[in_window] - value) ** 2).mean())
    hw = c * math.sqrt(sigma2) / math.sqrt(n_window)
    return symmetric_interval(value, hw, level, GLM, flag=flag)
