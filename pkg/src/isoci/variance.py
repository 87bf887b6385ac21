"""Noise-variance estimators for the regression model.

Two routes: the local-block estimator (second moment of the responses
about the block-average fit, over the data-driven block) and lattice
difference estimators whose stencils annihilate linear trends.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .design import Sample
from .errors import ScatterUnsupportedError
from .isotonic import BlockFit

LOCAL_BLOCK = "local_block"
DIFFERENCE = "difference"


@dataclass(frozen=True)
class VarianceEstimate:
    value: float
    method: str
    dof_note: int

    def __post_init__(self):
        if self.value < 0:
            raise ValueError("variance estimate must be nonnegative")


def local_block_variance(sample: Sample, fit: BlockFit) -> VarianceEstimate:
    """Mean squared deviation of the responses in [lower, upper] about the fit.

    Consistent for the noise variance as the data-driven block fills in;
    works for lattice and scatter designs alike.
    """
    grid = sample.grid
    if grid.is_lattice:
        slices = []
        for k, ax in enumerate(grid.axes):
            a = int(np.searchsorted(ax, fit.lower_corner[k], side="left"))
            b = int(np.searchsorted(ax, fit.upper_corner[k], side="right"))
            slices.append(slice(a, b))
        vals = sample.y[tuple(slices)].ravel()
    else:
        pts = sample.grid.points_array
        mask = np.all((pts >= fit.lower_corner) & (pts <= fit.upper_corner), axis=1)
        vals = sample.y[mask]
    if vals.size == 0:
        raise ValueError("block fit holds no design points")
    value = float(np.mean((vals - fit.average) ** 2))
    return VarianceEstimate(value=value, method=LOCAL_BLOCK, dof_note=int(vals.size))


def difference_variance(sample: Sample) -> VarianceEstimate:
    """Second-difference stencil estimator on a lattice, d <= 3.

    Stencil sums over interior points only, matching the (n_k - 2)
    divisors; the stencils annihilate linear trends exactly.
    """
    if not sample.grid.is_lattice:
        raise ScatterUnsupportedError(
            "difference estimator requires a lattice; use local_block_variance"
        )
    y = sample.y
    d = y.ndim
    if d > 3:
        raise ValueError(f"difference estimator supports d <= 3, got d = {d}")
    shape = y.shape
    if any(n < 3 for n in shape):
        raise ValueError("difference estimator needs at least 3 points per axis")
    interior = tuple(slice(1, -1) for _ in range(d))
    r = 2 * d * y[interior]
    for ax in range(d):
        lo = tuple(slice(None, -2) if a == ax else slice(1, -1) for a in range(d))
        hi = tuple(slice(2, None) if a == ax else slice(1, -1) for a in range(d))
        r = r - y[lo] - y[hi]
    n_terms = int(np.prod([n - 2 for n in shape]))
    # divisor = E(stencil)^2 / sigma^2 = (2d)^2 + 2d
    divisor = (2 * d) ** 2 + 2 * d
    value = float((r**2).sum() / (divisor * n_terms))
    return VarianceEstimate(value=value, method=DIFFERENCE, dof_note=n_terms)
