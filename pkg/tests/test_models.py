import math

import numpy as np
import pytest

from isoci import (
    BERNOULLI,
    GAUSSIAN,
    POISSON,
    CurrentStatusData,
    DesignGrid,
    PanelCountData,
    Sample,
    block_fit,
    current_status_ci,
    glm_isotonic_ci,
    grenander_ci,
    grenander_fit,
    local_block_variance,
    panel_count_ci,
    pava,
    pivotal_ci,
)
from isoci.errors import BoundaryVarianceWarning, DegenerateBoundaryWarning, OutOfSupportError
from isoci.models import panel_count_series

from oracles import grenander_minmax


# -- Grenander ----------------------------------------------------------------


def test_grenander_needs_two_points():
    with pytest.raises(ValueError):
        grenander_fit([1.0], 0.5)


def test_grenander_two_point_step():
    eps = 0.25
    fit = grenander_fit([1.0, 1.0 + eps], 1.0)
    assert fit.value == pytest.approx(1.0 / (1.0 + eps))
    assert fit.u_hat == 0.0 and fit.v_hat == 1.25


def test_grenander_integral_is_one():
    rng = np.random.default_rng(5)
    for _ in range(20):
        data = rng.exponential(size=30)
        fit = grenander_fit(data, float(np.median(data)))
        integral = float(np.sum(fit.slopes * np.diff(fit.knots)))
        assert integral == pytest.approx(1.0, abs=1e-12)
        assert np.all(np.diff(fit.slopes) < 0)


def test_grenander_matches_minmax_oracle():
    rng = np.random.default_rng(6)
    for _ in range(10):
        data = rng.exponential(size=20)
        hi = data.max()
        for q in np.linspace(0.01, 1.0, 20):
            x0 = q * hi
            want = grenander_minmax(data, x0)
            got = grenander_fit(data, x0).value
            assert got == pytest.approx(want, abs=1e-10)


def test_grenander_out_of_support():
    with pytest.raises(OutOfSupportError):
        grenander_fit([1.0, 2.0], 2.5)
    with pytest.raises(OutOfSupportError):
        grenander_fit([1.0, 2.0], 0.0)


def test_grenander_ci_arithmetic():
    data = np.array([0.2, 0.5, 0.9, 1.7, 2.5])
    x0 = 0.6
    fit = grenander_fit(data, x0)
    interval = grenander_ci(data, x0, c=2.11)
    want_hw = 2.11 * math.sqrt(fit.value) / math.sqrt(len(data) * (fit.v_hat - fit.u_hat))
    assert interval.half_width == pytest.approx(want_hw)
    assert interval.lower >= 0.0
    degenerate = grenander_ci(data, x0, c=0.0)
    assert degenerate.length == 0.0


# -- current status -----------------------------------------------------------


def test_current_status_all_ones_degenerate():
    data = CurrentStatusData([0.2, 0.4, 0.9], [1, 1, 1])
    with pytest.warns(DegenerateBoundaryWarning):
        interval = current_status_ci(data, 0.4, c=2.11)
    assert interval.center == 1.0 and interval.length == 0.0
    assert interval.flag == "degenerate_boundary"


def test_current_status_step_case():
    data = CurrentStatusData([0.25, 0.75], [0, 1])
    with pytest.warns(DegenerateBoundaryWarning):
        interval = current_status_ci(data, 0.75, c=2.11)
    assert interval.center == 1.0 and interval.length == 0.0


def test_current_status_clip_to_unit_interval():
    data = CurrentStatusData(np.linspace(0.05, 0.95, 20), [0, 1] * 10)
    interval = current_status_ci(data, 0.5, c=5.0)
    assert interval.lower >= 0.0 and interval.upper <= 1.0


# -- panel count ---------------------------------------------------------------


def test_panel_single_observation_degenerate():
    data = PanelCountData((( [0.5], [3] ),))
    interval = panel_count_ci(data, 0.5, c=2.11)
    assert interval.center == 3.0
    assert interval.length == 0.0


def test_panel_unit_weight_reduction_to_pava():
    rng = np.random.default_rng(9)
    times = np.sort(rng.uniform(size=12))
    counts = np.round(rng.uniform(0, 8, size=12))
    data = PanelCountData(tuple(([t], [c]) for t, c in zip(times, counts)))
    series = panel_count_series(data)
    np.testing.assert_array_equal(series.weights, np.ones(12))
    fit = pava(series.means, series.weights)
    for i in (0, 5, 11):
        interval = panel_count_ci(data, times[i], c=2.11)
        assert interval.center == pytest.approx(fit[i], abs=1e-12)


def test_panel_k1_equals_regression_pivotal_local_block():
    rng = np.random.default_rng(10)
    times = np.sort(rng.uniform(size=15))
    counts = np.round(rng.uniform(0, 10, size=15))
    data = PanelCountData(tuple(([t], [c]) for t, c in zip(times, counts)))
    sample = Sample(DesignGrid.lattice([times]), counts.astype(float))
    t0 = times[7]
    fit = block_fit(sample, [t0])
    sigma = math.sqrt(local_block_variance(sample, fit).value)
    want = pivotal_ci(fit, sigma, 2.11)
    got = panel_count_ci(data, t0, c=2.11)
    assert got.center == pytest.approx(want.center, abs=1e-12)
    assert got.half_width == pytest.approx(want.half_width, abs=1e-12)


def test_panel_long_format_ingestion():
    data = PanelCountData.from_long(
        subject_ids=[1, 1, 2, 2],
        times=[0.2, 0.6, 0.3, 0.9],
        counts=[1, 3, 0, 4],
    )
    assert len(data.subjects) == 2
    series = panel_count_series(data)
    assert len(series) == 4


def test_panel_validation():
    with pytest.raises(ValueError, match="nondecreasing"):
        PanelCountData((([0.5, 0.2], [1, 2]),))
    with pytest.raises(ValueError, match="nonnegative integers"):
        PanelCountData((([0.2], [-1]),))


# -- isotonic GLM ---------------------------------------------------------------


def test_glm_bernoulli_equals_current_status_fit():
    rng = np.random.default_rng(11)
    times = np.sort(rng.uniform(size=30))
    delta = (rng.uniform(size=30) < times).astype(float)
    t0 = times[12]
    cs = current_status_ci(CurrentStatusData(times, delta), t0, c=2.11)
    glm = glm_isotonic_ci(times, delta, BERNOULLI, t0, c=2.11)
    assert glm.center == pytest.approx(cs.center, abs=1e-12)
    # same fitted probability and same window count: widths agree before clipping
    assert glm.half_width == pytest.approx(cs.half_width, abs=1e-12)


def test_glm_gaussian_equals_regression_pivotal():
    rng = np.random.default_rng(12)
    x = np.sort(rng.uniform(size=25))
    y = rng.standard_normal(25) + 2 * x
    x0 = x[10]
    sample = Sample(DesignGrid.lattice([x]), y)
    fit = block_fit(sample, [x0])
    sigma = math.sqrt(local_block_variance(sample, fit).value)
    want = pivotal_ci(fit, sigma, 2.11)
    got = glm_isotonic_ci(x, y, GAUSSIAN, x0, c=2.11, variance_mode="local_block")
    assert got.center == pytest.approx(want.center, abs=1e-12)
    assert got.half_width == pytest.approx(want.half_width, abs=1e-12)


def test_glm_bernoulli_boundary_warns():
    x = np.linspace(0.1, 1.0, 10)
    y = np.zeros(10)
    with pytest.warns(BoundaryVarianceWarning):
        interval = glm_isotonic_ci(x, y, BERNOULLI, 0.5, c=2.11)
    assert interval.length == 0.0
    assert interval.flag == "boundary_variance"


def test_glm_poisson_family_variance():
    x = np.linspace(0.1, 1.0, 40)
    y = np.round(np.linspace(0, 6, 40))
    interval = glm_isotonic_ci(x, y, POISSON, x[20], c=2.0)
    assert interval.half_width > 0


def test_glm_requires_sorted_x():
    with pytest.raises(ValueError, match="sorted"):
        glm_isotonic_ci([0.5, 0.2], [1.0, 2.0], GAUSSIAN, 0.3, c=2.0)


# -- Monte Carlo coverage of the four model intervals ---------------------------


def _model_coverage(model, B, n, seed, **kw):
    from isoci.experiments import ExperimentConfig, run_coverage

    cfg = ExperimentConfig(
        model=model, B=B, n=n, seed=seed, x0=[0.5], delta=0.05, c=2.11, **kw
    )
    rep = run_coverage(cfg)
    assert rep.failures[model][0] == 0
    return float(rep.coverage[model][0])


@pytest.mark.slow
def test_grenander_coverage():
    cov = _model_coverage(
        "grenander", B=2000, n=500, seed=61, model_params={"rate": 1.0, "trunc": 3.0}
    )
    assert 0.92 <= cov <= 0.975


@pytest.mark.slow
def test_current_status_coverage():
    cov = _model_coverage("current_status", B=2000, n=1000, seed=62)
    assert 0.92 <= cov <= 0.975


@pytest.mark.slow
def test_panel_count_coverage():
    cov = _model_coverage(
        "panel_count", B=1000, n=500, seed=63,
        model_params={"rate": 2.0, "K": 2, "tmax": 1.0},
    )
    assert 0.91 <= cov <= 0.98


@pytest.mark.slow
def test_glm_poisson_coverage():
    cov = _model_coverage(
        "glm", B=2000, n=1000, seed=64, truth="1 + 2*x1", family="poisson"
    )
    assert 0.92 <= cov <= 0.975
