"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Replication counts follow the reduced desk-scale protocol; tolerance
bands below are fixed up front and match the widened Monte Carlo error
at those counts.
"""

import math
import time

import numpy as np
import pytest

from isoci import (
    DesignGrid,
    Sample,
    SimConfig,
    block_max_min,
    block_min_max,
    difference_variance,
    grenander_fit,
    lrt_statistic,
    pava,
    simulate_D_quantile,
    simulate_pivot_quantile,
)
from isoci.exprs import Expression
from isoci.experiments import (
    ExperimentConfig,
    run_bw_comparison,
    run_coverage,
    run_estimator_comparison,
    run_length_study,
)
from isoci.models import panel_count_series, PanelCountData
from isoci.simulate import SCALED_ERROR, replication_rng

from oracles import enum_max_min, enum_min_max, grenander_minmax


def _report(num: int, desc: str, ok: bool, detail: str = ""):
    print(f"\n[criterion {num:02d}] {'PASS' if ok else 'FAIL'}: {desc} {detail}")
    assert ok, f"criterion {num}: {desc} {detail}"


def _pivot_cfg(slope: float, seed: int) -> SimConfig:
    return SimConfig(
        truth=Expression(f"{slope}*(x1 - 0.5)"),
        grid=DesignGrid.regular_lattice([10_000]),
        x0=np.array([0.5]),
        sigma=1.0,
        B=20_000,
        seed=seed,
        statistic="pivot",
    )


@pytest.fixture(scope="module")
def d1_quantiles_slope5():
    start = time.time()
    ests = simulate_pivot_quantile(_pivot_cfg(5.0, seed=101), [0.05, 0.10])
    return ests, time.time() - start


def test_criterion_01_critical_value_d1(d1_quantiles_slope5):
    (c05, c10), elapsed = d1_quantiles_slope5
    ok = abs(c05.c - 2.11) <= 0.06 and abs(c10.c - 1.68) <= 0.05 and elapsed < 180
    _report(
        1,
        "d=1 critical values at n=1e4, B=2e4",
        ok,
        f"c05={c05.c:.4f} (target 2.11±0.06), c10={c10.c:.4f} (target 1.68±0.05), "
        f"elapsed={elapsed:.1f}s",
    )


def test_criterion_02_pivotality_across_slopes(d1_quantiles_slope5):
    (c05_a, c10_a), _ = d1_quantiles_slope5
    c05_b, c10_b = simulate_pivot_quantile(_pivot_cfg(2.0, seed=102), [0.05, 0.10])
    pooled05 = math.hypot(c05_a.stderr, c05_b.stderr)
    pooled10 = math.hypot(c10_a.stderr, c10_b.stderr)
    ok = abs(c05_a.c - c05_b.c) <= 3 * pooled05 and abs(c10_a.c - c10_b.c) <= 3 * pooled10
    _report(
        2,
        "pivot quantiles agree across slopes 5 and 2",
        ok,
        f"|dc05|={abs(c05_a.c - c05_b.c):.4f} (3se={3 * pooled05:.4f}), "
        f"|dc10|={abs(c10_a.c - c10_b.c):.4f} (3se={3 * pooled10:.4f})",
    )


def test_criterion_03_critical_value_d2():
    start = time.time()
    cfg = SimConfig(
        truth=Expression("2*x1 + 2*x2 - 2"),
        grid=DesignGrid.regular_lattice([50, 50]),
        x0=np.array([0.5, 0.5]),
        sigma=1.0,
        B=2000,
        seed=103,
    )
    (c05,) = simulate_pivot_quantile(cfg, [0.05])
    elapsed = time.time() - start
    ok = 1.66 <= c05.c <= 1.90 and elapsed < 900
    _report(
        3,
        "d=2 critical value on the 50x50 lattice",
        ok,
        f"c05={c05.c:.4f} (target [1.66, 1.90]), elapsed={elapsed:.1f}s",
    )


def test_criterion_04_scaled_error_quantile():
    cfg = SimConfig(
        truth=Expression("5*(x1 - 0.5)"),
        grid=DesignGrid.regular_lattice([10_000]),
        x0=np.array([0.5]),
        sigma=1.0,
        B=20_000,
        seed=104,
        statistic=SCALED_ERROR,
    )
    (c05,) = simulate_D_quantile(cfg, [5.0], [0.05])
    ok = abs(c05.c - 1.9964) <= 0.06
    _report(
        4,
        "derivative-scaled error quantile, d=1",
        ok,
        f"c05={c05.c:.4f} (target 1.9964±0.06)",
    )


def test_criterion_05_coverage_d1():
    cfg = ExperimentConfig(
        model="regression", grid=[100], truth="exp(2*x1)", sigma=1.0, B=5000,
        delta=0.05, c=2.11, methods=["pivotal"],
        variance_modes=["known", "difference"], seed=105, points=[49],
    )
    rep = run_coverage(cfg)
    cov_known = float(rep.coverage["pivotal[known]"][0])
    cov_diff = float(rep.coverage["pivotal[difference]"][0])
    ok = 0.93 <= cov_known <= 0.965 and abs(cov_diff - cov_known) <= 0.01
    _report(
        5,
        "d=1 coverage at x=0.5 (known and difference-estimated sigma)",
        ok,
        f"known={cov_known:.4f} (target [0.93, 0.965]), diff={cov_diff:.4f} "
        f"(within 0.01 of known)",
    )


def test_criterion_06_variance_estimator_median():
    grid = DesignGrid.regular_lattice([100])
    f0 = np.exp(2.0 * grid.axes[0])
    vals = np.empty(5000)
    for b in range(5000):
        y = f0 + replication_rng(106, b).standard_normal(100)
        vals[b] = difference_variance(Sample(grid, y)).value
    med = float(np.median(vals))
    ok = abs(med - 0.980) <= 0.010
    _report(
        6,
        "median of the difference variance estimator",
        ok,
        f"median={med:.4f} (target 0.980±0.010)",
    )


def test_criterion_07_length_shrinks_at_oracle_rate():
    cfg = ExperimentConfig(
        model="regression", grid=[1], truth="exp(x1)", sigma=1.0, B=2000,
        delta=0.05, seed=107, x0=[0.5],
    )
    rep = run_length_study(cfg, [100, 400, 1600])
    ok = abs(rep.slope - (-1.0 / 3.0)) <= 0.10
    _report(
        7,
        "log median length slope across n in {100, 400, 1600}",
        ok,
        f"slope={rep.slope:.4f} (target -1/3±0.10)",
    )


def test_criterion_08_estimator_comparison():
    cfg = ExperimentConfig(
        model="regression", grid=[25, 25], truth="exp(x1 + x2)", sigma=1.0,
        B=2000, delta=0.05, seed=108, variance_modes=["known"],
    )
    rep = run_estimator_comparison(cfg)
    avg = rep.summary["pivotal[known]"]
    mm = rep.summary["max_min_only[known]"]
    ok = avg["mean"] >= mm["mean"] - 0.005 and avg["sd"] <= mm["sd"] + 0.002
    _report(
        8,
        "block-average vs max-min-only coverage on the 25x25 lattice",
        ok,
        f"mean(avg)={avg['mean']:.4f} vs mean(maxmin)={mm['mean']:.4f}; "
        f"sd(avg)={avg['sd']:.5f} vs sd(maxmin)={mm['sd']:.5f}",
    )


def test_criterion_09_exact_identity_suites():
    rng = np.random.default_rng(109)
    # (a) univariate estimator == PAVA at design points, 300 instances
    for _ in range(300):
        n = int(rng.integers(2, 200))
        y = rng.standard_normal(n)
        grid = DesignGrid.regular_lattice([n])
        s = Sample(grid, y)
        i = int(rng.integers(0, n))
        value, _, _ = block_max_min(s, [grid.axes[0][i]])
        assert abs(value - pava(y)[i]) <= 1e-10
    # (b) lattice estimators == exhaustive enumeration, exact on integer data
    for d, trials in ((2, 120), (3, 80)):
        for _ in range(trials):
            axes = [np.sort(rng.uniform(size=rng.integers(2, 6))) for _ in range(d)]
            grid = DesignGrid.lattice(axes)
            s = Sample(grid, rng.integers(-9, 10, size=grid.shape).astype(float))
            pts = grid.points()
            x0 = pts[rng.integers(0, len(pts))]
            assert block_max_min(s, x0)[0] == enum_max_min(pts, s.y_flat(), x0)
            assert block_min_max(s, x0)[0] == enum_min_max(pts, s.y_flat(), x0)
    # (c) likelihood-ratio statistic: residual form == restricted form
    for _ in range(500):
        n = int(rng.integers(5, 101))
        s = Sample(DesignGrid.regular_lattice([n]), rng.standard_normal(n))
        m0 = float(rng.standard_normal())
        res = lrt_statistic(s, float(rng.uniform(0.1, 0.9)), m0)
        alt = float(
            ((m0 - res.fit[res.changed]) ** 2).sum()
            - ((m0 - res.constrained_fit[res.changed]) ** 2).sum()
        )
        assert abs(alt - res.stat) <= 1e-8 * max(1.0, abs(res.stat))
    # (d) decreasing-density estimate == hull slope at many query points
    for _ in range(10):
        data = rng.exponential(size=20)
        for q in np.linspace(0.02, 1.0, 20):
            x0 = float(q * data.max())
            assert abs(grenander_fit(data, x0).value - grenander_minmax(data, x0)) <= 1e-10
    # (e) difference stencils annihilate linear trends exactly
    for shape in ((11,), (6, 7), (4, 5, 6)):
        grids = np.meshgrid(*[np.arange(m, dtype=float) for m in shape], indexing="ij")
        y = 0.75 + sum((k + 1) * 0.5 * g for k, g in enumerate(grids))
        assert difference_variance(Sample(DesignGrid.regular_lattice(shape), y)).value == 0.0
    # (f) unit-weight panel pooling reduces to plain isotonic regression
    for _ in range(20):
        m = int(rng.integers(2, 25))
        times = np.sort(rng.choice(np.arange(1, 100), size=m, replace=False)) / 100.0
        counts = np.round(rng.uniform(0, 9, size=m))
        data = PanelCountData(tuple(([t], [c]) for t, c in zip(times, counts)))
        series = panel_count_series(data)
        np.testing.assert_array_equal(pava(series.means, series.weights), pava(counts))
    _report(9, "exact-identity suites", True, "(all six identity families hold)")


def test_criterion_10_bw_flat_region_undercoverage():
    region = [0.1, 0.5]
    points = [i for i in range(1000) if region[0] <= (i + 1) / 1000 <= region[1]]
    cfg = ExperimentConfig(
        model="regression", grid=[1000], truth="10*pow(x1,5)", sigma=1.0,
        B=1000, delta=0.05, c=2.11, seed=1, points=points,
        region=region, under_threshold=0.93, lengths=True,
    )
    rep = run_bw_comparison(cfg)
    n_lrt = rep.meta["undercover_count_lrt"]
    n_piv = rep.meta["undercover_count_pivotal"]
    ok = n_lrt > n_piv
    _report(
        10,
        "likelihood-ratio intervals under-cover more on the flat region",
        ok,
        f"lrt under-coverers={n_lrt} vs pivotal={n_piv} (threshold 0.93 on x in [0.1, 0.5])",
    )


def test_criterion_11_worker_count_determinism(tmp_path):
    base = dict(
        model="regression", grid=[6, 6], truth="exp(x1 + x2)", sigma=1.0,
        B=60, delta=0.05, seed=111, variance_modes=["known", "difference"],
        methods=["pivotal", "max_min_only"],
    )
    rep1 = run_coverage(ExperimentConfig(**base, workers=1))
    rep2 = run_coverage(ExperimentConfig(**base, workers=4))
    p1, p2 = tmp_path / "w1.csv", tmp_path / "w4.csv"
    rep1.to_csv(p1)
    rep2.to_csv(p2)
    ok = p1.read_bytes() == p2.read_bytes()
    _report(11, "byte-identical CSV for different worker counts", ok, "")
