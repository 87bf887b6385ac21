"""Numba kernels: PAVA with block boundaries and lattice block estimators.

The lattice kernels enumerate every candidate corner pair (lower-left
corners on design coordinates below the query, upper-right corners
above) reading block sums off a summed-area table, so each block mean
costs O(1).  Ties are broken deterministically: the outer maximiser
keeps the lexicographically largest corner (which is the coordinatewise
largest whenever one exists, i.e. the smallest block), the outer
minimiser the lexicographically smallest, and inner optimisers mirror
that rule.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def pava_blocks(y, w):
    """Weighted pool-adjacent-violators in O(n).

    Returns (fit, starts) where ``fit`` is the nondecreasing projection
    and ``starts`` holds the b+1 block boundaries (starts[j]..starts[j+1]
    is the j-th constant block).
    """
    n = y.shape[0]
    fit = np.empty(n)
    means = np.empty(n)
    wts = np.empty(n)
    starts = np.empty(n + 1, dtype=np.int64)
    nb = 0
    for i in range(n):
        means[nb] = y[i]
        wts[nb] = w[i]
        starts[nb] = i
        nb += 1
        while nb > 1 and means[nb - 2] >= means[nb - 1]:
            tot = wts[nb - 2] + wts[nb - 1]
            means[nb - 2] = (wts[nb - 2] * means[nb - 2] + wts[nb - 1] * means[nb - 1]) / tot
            wts[nb - 2] = tot
            nb -= 1
    starts[nb] = n
    for b in range(nb):
        v = means[b]
        for i in range(starts[b], starts[b + 1]):
            fit[i] = v
    return fit, starts[: nb + 1].copy()


@njit(cache=True)
def level_set(starts, i):
    """Block [lo, hi] (inclusive indices) of the fit containing index i."""
    lo = 0
    hi = starts.shape[0] - 1
    # binary search for the block with starts[b] <= i < starts[b+1]
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if starts[mid] <= i:
            lo = mid
        else:
            hi = mid
    return starts[lo], starts[lo + 1] - 1


@njit(cache=True)
def fit_point_2d(pref, n1, n2, iu1, iu2, jv1, jv2):
    """Block max-min and min-max at one query point of a 2-d lattice.

    ``iu``: number of lower-corner candidates per axis (indices 0..iu-1);
    ``jv``: first upper-corner candidate index per axis.  Returns
    (max_min, min_max, ua1, ua2, mv1, mv2, vc1, vc2, ub1, ub2): the
    max-min value with its chosen lower corner (ua) and inner minimiser
    (mv), and the min-max value with its chosen upper corner (vc) and
    inner maximiser (ub), all as lattice indices.
    """
    nv1 = n1 - jv1
    nv2 = n2 - jv2
    rowmin = np.empty((iu1, iu2))
    rowmin_v1 = np.empty((iu1, iu2), dtype=np.int64)
    rowmin_v2 = np.empty((iu1, iu2), dtype=np.int64)
    colmax = np.full((nv1, nv2), -np.inf)
    colmax_u1 = np.zeros((nv1, nv2), dtype=np.int64)
    colmax_u2 = np.zeros((nv1, nv2), dtype=np.int64)
    for a1 in range(iu1):
        for a2 in range(iu2):
            m_best = np.inf
            bv1 = jv1
            bv2 = jv2
            for c1 in range(jv1, n1):
                r1 = c1 - a1 + 1
                for c2 in range(jv2, n2):
                    s = (
                        pref[c1 + 1, c2 + 1]
                        - pref[a1, c2 + 1]
                        - pref[c1 + 1, a2]
                        + pref[a1, a2]
                    )
                    m = s / (r1 * (c2 - a2 + 1))
                    if m < m_best:
                        m_best = m
                        bv1 = c1
                        bv2 = c2
                    i1 = c1 - jv1
                    i2 = c2 - jv2
                    if m >= colmax[i1, i2]:
                        colmax[i1, i2] = m
                        colmax_u1[i1, i2] = a1
                        colmax_u2[i1, i2] = a2
            rowmin[a1, a2] = m_best
            rowmin_v1[a1, a2] = bv1
            rowmin_v2[a1, a2] = bv2
    max_min = -np.inf
    ua1 = 0
    ua2 = 0
    for a1 in range(iu1):
        for a2 in range(iu2):
            if rowmin[a1, a2] >= max_min:
                max_min = rowmin[a1, a2]
                ua1 = a1
                ua2 = a2
    min_max = np.inf
    vc1 = jv1
    vc2 = jv2
    for i1 in range(nv1):
        for i2 in range(nv2):
            if colmax[i1, i2] < min_max:
                min_max = colmax[i1, i2]
                vc1 = i1 + jv1
                vc2 = i2 + jv2
    return (
        max_min,
        min_max,
        ua1,
        ua2,
        rowmin_v1[ua1, ua2],
        rowmin_v2[ua1, ua2],
        vc1,
        vc2,
        colmax_u1[vc1 - jv1, vc2 - jv2],
        colmax_u2[vc1 - jv1, vc2 - jv2],
    )


@njit(cache=True)
def fit_point_3d(pref, n1, n2, n3, iu1, iu2, iu3, jv1, jv2, jv3):
    """3-d analogue of fit_point_2d."""
    nv1 = n1 - jv1
    nv2 = n2 - jv2
    nv3 = n3 - jv3
    rowmin = np.empty((iu1, iu2, iu3))
    rowmin_v = np.empty((iu1, iu2, iu3, 3), dtype=np.int64)
    colmax = np.full((nv1, nv2, nv3), -np.inf)
    colmax_u = np.zeros((nv1, nv2, nv3, 3), dtype=np.int64)
    for a1 in range(iu1):
        for a2 in range(iu2):
            for a3 in range(iu3):
                m_best = np.inf
                bv1 = jv1
                bv2 = jv2
                bv3 = jv3
                for c1 in range(jv1, n1):
                    r1 = c1 - a1 + 1
                    for c2 in range(jv2, n2):
                        r12 = r1 * (c2 - a2 + 1)
                        for c3 in range(jv3, n3):
                            s = (
                                pref[c1 + 1, c2 + 1, c3 + 1]
                                - pref[a1, c2 + 1, c3 + 1]
                                - pref[c1 + 1, a2, c3 + 1]
                                - pref[c1 + 1, c2 + 1, a3]
                                + pref[a1, a2, c3 + 1]
                                + pref[a1, c2 + 1, a3]
                                + pref[c1 + 1, a2, a3]
                                - pref[a1, a2, a3]
                            )
                            m = s / (r12 * (c3 - a3 + 1))
                            if m < m_best:
                                m_best = m
                                bv1 = c1
                                bv2 = c2
                                bv3 = c3
                            i1 = c1 - jv1
                            i2 = c2 - jv2
                            i3 = c3 - jv3
                            if m >= colmax[i1, i2, i3]:
                                colmax[i1, i2, i3] = m
                                colmax_u[i1, i2, i3, 0] = a1
                                colmax_u[i1, i2, i3, 1] = a2
                                colmax_u[i1, i2, i3, 2] = a3
                rowmin[a1, a2, a3] = m_best
                rowmin_v[a1, a2, a3, 0] = bv1
                rowmin_v[a1, a2, a3, 1] = bv2
                rowmin_v[a1, a2, a3, 2] = bv3
    max_min = -np.inf
    ua1 = 0
    ua2 = 0
    ua3 = 0
    for a1 in range(iu1):
        for a2 in range(iu2):
            for a3 in range(iu3):
                if rowmin[a1, a2, a3] >= max_min:
                    max_min = rowmin[a1, a2, a3]
                    ua1 = a1
                    ua2 = a2
                    ua3 = a3
    min_max = np.inf
    vc1 = jv1
    vc2 = jv2
    vc3 = jv3
    for i1 in range(nv1):
        for i2 in range(nv2):
            for i3 in range(nv3):
                if colmax[i1, i2, i3] < min_max:
                    min_max = colmax[i1, i2, i3]
                    vc1 = i1 + jv1
                    vc2 = i2 + jv2
                    vc3 = i3 + jv3
    return (
        max_min,
        min_max,
        ua1,
        ua2,
        ua3,
        rowmin_v[ua1, ua2, ua3, 0],
        rowmin_v[ua1, ua2, ua3, 1],
        rowmin_v[ua1, ua2, ua3, 2],
        vc1,
        vc2,
        vc3,
        colmax_u[vc1 - jv1, vc2 - jv2, vc3 - jv3, 0],
        colmax_u[vc1 - jv1, vc2 - jv2, vc3 - jv3, 1],
        colmax_u[vc1 - jv1, vc2 - jv2, vc3 - jv3, 2],
    )


@njit(cache=True)
def fit_all_2d(pref, n1, n2):
    """Both block estimators and block corners at every 2-d lattice point.

    Returns per-point arrays (max_min, min_max, u1, u2, mv1, mv2, v1, v2):
    lower corner of the max-min optimum (u), its inner minimiser (mv) and
    the upper corner of the min-max optimum (v), all as lattice indices.
    """
    fm = np.empty((n1, n2))
    fp = np.empty((n1, n2))
    u1 = np.empty((n1, n2), dtype=np.int64)
    u2 = np.empty((n1, n2), dtype=np.int64)
    mv1 = np.empty((n1, n2), dtype=np.int64)
    mv2 = np.empty((n1, n2), dtype=np.int64)
    v1 = np.empty((n1, n2), dtype=np.int64)
    v2 = np.empty((n1, n2), dtype=np.int64)
    for i0 in range(n1):
        for j0 in range(n2):
            res = fit_point_2d(pref, n1, n2, i0 + 1, j0 + 1, i0, j0)
            fm[i0, j0] = res[0]
            fp[i0, j0] = res[1]
            u1[i0, j0] = res[2]
            u2[i0, j0] = res[3]
            mv1[i0, j0] = res[4]
            mv2[i0, j0] = res[5]
            v1[i0, j0] = res[6]
            v2[i0, j0] = res[7]
    return fm, fp, u1, u2, mv1, mv2, v1, v2


@njit(cache=True)
def fit_all_3d(pref, n1, n2, n3):
    """3-d analogue of fit_all_2d."""
    fm = np.empty((n1, n2, n3))
    fp = np.empty((n1, n2, n3))
    u = np.empty((n1, n2, n3, 3), dtype=np.int64)
    mv = np.empty((n1, n2, n3, 3), dtype=np.int64)
    v = np.empty((n1, n2, n3, 3), dtype=np.int64)
    for i0 in range(n1):
        for j0 in range(n2):
            for k0 in range(n3):
                res = fit_point_3d(
                    pref, n1, n2, n3, i0 + 1, j0 + 1, k0 + 1, i0, j0, k0
                )
                fm[i0, j0, k0] = res[0]
                fp[i0, j0, k0] = res[1]
                u[i0, j0, k0, 0] = res[2]
                u[i0, j0, k0, 1] = res[3]
                u[i0, j0, k0, 2] = res[4]
                mv[i0, j0, k0, 0] = res[5]
                mv[i0, j0, k0, 1] = res[6]
                mv[i0, j0, k0, 2] = res[7]
                v[i0, j0, k0, 0] = res[8]
                v[i0, j0, k0, 1] = res[9]
                v[i0, j0, k0, 2] = res[10]
    return fm, fp, u, mv, v
