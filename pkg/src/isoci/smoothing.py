"""Tricube-weighted local polynomial smoothing on nearest-neighbour windows."""

from __future__ import annotations

import numpy as np


def _tricube(r: np.ndarray) -> np.ndarray:
    w = np.clip(1.0 - np.clip(r, 0.0, 1.0) ** 3, 0.0, 1.0) ** 3
    return w


def loess(x, y, span: float = 0.75, degree: int = 1) -> np.ndarray:
    """Smooth ``y`` over design ``x`` by local weighted polynomial fits.

    Each point is fitted from its ``ceil(span * n)`` nearest neighbours
    with tricube weights; a rank-deficient local fit falls back to the
    locally weighted constant.

    Parameters
    ----------
    x : (n, d) or (n,) design locations
    y : (n,) values to smooth
    span : fraction of points in each local window
    degree : 1 (local linear) or 2 (local quadratic, d = 1 only)
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    y = np.asarray(y, dtype=float).ravel()
    n, d = x.shape
    if y.shape != (n,):
        raise ValueError("x and y lengths differ")
    if not 0 < span <= 1:
        raise ValueError("span must be in (0, 1]")
    if degree not in (1, 2):
        raise ValueError("degree must be 1 or 2")
    if degree == 2 and d != 1:
        raise ValueError("local quadratic smoothing is univariate only")
    k = max(int(np.ceil(span * n)), min(n, degree + 2))
    out = np.empty(n)
    for i in range(n):
        dist = np.sqrt(((x - x[i]) ** 2).sum(axis=1))
        nearest = np.argpartition(dist, k - 1)[:k]
        h = dist[nearest].max()
        if h == 0.0:
            out[i] = y[nearest].mean()
            continue
        w = _tricube(dist[nearest] / h)
        if w.sum() == 0.0:
            out[i] = y[nearest].mean()
            continue
        t = (x[nearest] - x[i]) / h
        cols = [np.ones(k)]
        for j in range(d):
            cols.append(t[:, j])
        if degree == 2:
            cols.append(t[:, 0] ** 2)
        design = np.stack(cols, axis=1)
        sw = np.sqrt(w)
        coef, _, rank, _ = np.linalg.lstsq(design * sw[:, None], y[nearest] * sw, rcond=None)
        if rank < design.shape[1]:
            # degenerate neighbourhood: local constant fallback
            out[i] = float(np.average(y[nearest], weights=w))
        else:
            out[i] = float(coef[0])
    return out
