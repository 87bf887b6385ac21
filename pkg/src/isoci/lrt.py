"""Banerjee-Wellner likelihood-ratio inference for univariate regression.

The constrained fit under H0: f(x0) = m0 is obtained from two isotonic
regressions (left of and right of x0) followed by thresholding at m0;
the test statistic is the residual-sum-of-squares difference, and the
interval comes from inverting the family of tests at a fixed critical
value.  The shipped default critical value 2.26916 presumes a
non-vanishing first derivative at x0; with more vanishing derivatives
the limit law changes and the interval is no longer calibrated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ci import ConfidenceInterval
from .design import Sample
from .isotonic import pava
from .variance import difference_variance

DEFAULT_LRT_CRITICAL = 2.26916
LRT = "lrt"

_BISECT_TOL = 1e-8


@dataclass(frozen=True)
class LRTResult:
    """Likelihood-ratio statistic with both fitted vectors (sorted-x order)."""

    stat: float
    fit: np.ndarray
    constrained_fit: np.ndarray
    changed: np.ndarray  # indices where the two fits differ


def _sorted_xy(sample: Sample) -> tuple[np.ndarray, np.ndarray]:
    if sample.dim != 1:
        raise ValueError("likelihood-ratio inference is univariate only")
    if sample.grid.is_lattice:
        return sample.grid.axes[0], sample.y
    x = sample.grid.points_array[:, 0]
    order = np.argsort(x, kind="stable")
    return x[order], sample.y[order]


def constrained_isotonic(sample: Sample, x0: float, m0: float) -> np.ndarray:
    """Isotonic fit constrained to pass through m0 at x0 (sorted-x order).

    Left of x0 the fit is min(pava(left responses), m0), right of x0 it
    is max(pava(right responses), m0); an empty side simply drops its
    rule.  The output is nondecreasing and respects <= m0 / >= m0 on the
    two sides.
    """
    x, y = _sorted_xy(sample)
    split = int(np.searchsorted(x, x0, side="right"))
    out = np.empty_like(y)
    if split > 0:
        out[:split] = np.minimum(pava(y[:split]), m0)
    if split < len(y):
        out[split:] = np.maximum(pava(y[split:]), m0)
    return out


def lrt_statistic(sample: Sample, x0: float, m0: float) -> LRTResult:
    """2 log likelihood ratio for H0: f(x0) = m0 (Gaussian likelihood).

    The residual-difference form is cross-checked against the restricted
    sum-of-squares identity over the indices where the fits differ; a
    disagreement beyond 1e-8 relative indicates a broken invariant and
    raises.
    """
    x, y = _sorted_xy(sample)
    fit = pava(y)
    fit0 = constrained_isotonic(sample, x0, m0)
    rss = float(((y - fit) ** 2).sum())
    rss0 = float(((y - fit0) ** 2).sum())
    stat = max(rss0 - rss, 0.0)
    scale = max(1.0, float(np.abs(y).max()) ** 2)
    changed = np.where(np.abs(fit - fit0) > 1e-10 * math.sqrt(scale))[0]
    alt = float(((m0 - fit[changed]) ** 2).sum() - ((m0 - fit0[changed]) ** 2).sum())
    if abs(alt - stat) > 1e-8 * max(stat, alt, scale * 1e-6):
        raise RuntimeError(
            f"restricted-sum identity violated: {stat} vs {alt}"
        )
    return LRTResult(stat=stat, fit=fit, constrained_fit=fit0, changed=changed)


class LrtProfile:
    """Prepared evaluator of the statistic as a function of m0.

    After an O(n) setup the statistic at any m0 costs O(log n): the left
    fit is nondecreasing so thresholding at m0 clips a suffix, the right
    fit clips a prefix, and both contributions reduce to prefix sums.
    """

    def __init__(self, sample: Sample, x0: float):
        x, y = _sorted_xy(sample)
        self.x, self.y = x, y
        split = int(np.searchsorted(x, x0, side="right"))
        self.split = split
        whole = pava(y)
        self.rss_unconstrained = float(((y - whole) ** 2).sum())
        anchor_idx = split - 1 if split > 0 else 0
        self.anchor = float(whole[anchor_idx])
        yl, yr = y[:split], y[split:]
        self.fit_left = pava(yl) if split > 0 else np.empty(0)
        self.fit_right = pava(yr) if split < len(y) else np.empty(0)
        # left side: residual prefix for the unclipped head, moment
        # suffixes for the clipped tail
        resl = np.concatenate(([0.0], np.cumsum((yl - self.fit_left) ** 2)))
        self._resl = resl
        self._sl = np.concatenate((np.cumsum(yl[::-1])[::-1], [0.0]))
        self._ql = np.concatenate((np.cumsum((yl**2)[::-1])[::-1], [0.0]))
        # right side: moment prefixes for the clipped head, residual suffix
        resr = ((yr - self.fit_right) ** 2)[::-1]
        self._resr = np.concatenate(([0.0], np.cumsum(resr)))[::-1]
        self._sr = np.concatenate(([0.0], np.cumsum(yr)))
        self._qr = np.concatenate(([0.0], np.cumsum(yr**2)))

    def stat(self, m0: float) -> float:
        nl = len(self.fit_left)
        t = int(np.searchsorted(self.fit_left, m0, side="right"))
        rss_l = self._resl[t] + self._ql[t] - 2 * m0 * self._sl[t] + m0 * m0 * (nl - t)
        t2 = int(np.searchsorted(self.fit_right, m0, side="left"))
        rss_r = (
            self._qr[t2]
            - 2 * m0 * self._sr[t2]
            + m0 * m0 * t2
            + self._resr[t2]
        )
        return max(rss_l + rss_r - self.rss_unconstrained, 0.0)


def _bracket_and_bisect(profile: LrtProfile, threshold: float, direction: int):
    """Endpoint of {m0 : stat(m0) <= threshold} in one direction.

    Returns (endpoint, flagged): flagged means the statistic never
    exceeded the threshold within the data range plus one span.
    """
    y = profile.y
    span = max(float(y.max() - y.min()), 1.0)
    limit = (float(y.max()) + span) if direction > 0 else (float(y.min()) - span)
    inside = profile.anchor
    step = span / 8.0
    outside = None
    while True:
        cand = inside + direction * step
        if (direction > 0 and cand > limit) or (direction < 0 and cand < limit):
            if profile.stat(limit) <= threshold:
                return limit, True
            outside = limit
            break
        if profile.stat(cand) > threshold:
            outside = cand
            break
        inside = cand
        step *= 2.0
    while abs(outside - inside) > _BISECT_TOL:
        mid = 0.5 * (inside + outside)
        if profile.stat(mid) <= threshold:
            inside = mid
        else:
            outside = mid
    return inside, False


def lrt_ci(
    sample: Sample,
    x0: float,
    crit: float = DEFAULT_LRT_CRITICAL,
    sigma2: float | None = None,
    level: float = 0.95,
) -> ConfidenceInterval:
    """Interval from inverting the likelihood-ratio tests at ``crit``.

    ``sigma2``: known noise variance; None re-scales the statistic by
    the difference-estimator variance instead.
    """
    if crit <= 0:
        raise ValueError("critical value must be positive")
    if sigma2 is None:
        sigma2 = difference_variance(sample).value
    profile = LrtProfile(sample, x0)
    threshold = crit * sigma2
    upper, flag_up = _bracket_and_bisect(profile, threshold, +1)
    lower, flag_lo = _bracket_and_bisect(profile, threshold, -1)
    center = profile.anchor
    flag = "nonfinite_bracket" if (flag_up or flag_lo) else None
    return ConfidenceInterval(
        center=center,
        half_width=max(upper - center, center - lower),
        lower=lower,
        upper=upper,
        level=level,
        method=LRT,
        clipped=None,
        flag=flag,
    )
