import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isoci import pava
from isoci.isotonic import pava_with_blocks

from oracles import pava_bruteforce


def test_already_monotone_is_fixed_point():
    np.testing.assert_array_equal(pava([1.0, 2.0, 3.0]), [1.0, 2.0, 3.0])


def test_single_violation_pools_everything():
    np.testing.assert_allclose(pava([3.0, 1.0, 2.0]), [2.0, 2.0, 2.0])


def test_partial_pool():
    np.testing.assert_allclose(pava([1.0, 3.0, 2.0]), [1.0, 2.5, 2.5])


def test_weighted_matches_bruteforce():
    rng = np.random.default_rng(5)
    for _ in range(30):
        n = rng.integers(1, 9)
        y = rng.standard_normal(n)
        w = rng.uniform(0.2, 3.0, size=n)
        np.testing.assert_allclose(pava(y, w), pava_bruteforce(y, w), atol=1e-10)


def test_length_mismatch_and_bad_weight():
    with pytest.raises(ValueError, match="length mismatch"):
        pava([1.0, 2.0], [1.0])
    with pytest.raises(ValueError, match="positive"):
        pava([1.0, 2.0], [1.0, 0.0])


def test_block_boundaries_partition():
    y = np.array([3.0, 1.0, 2.0, 0.5, 5.0])
    fit, starts = pava_with_blocks(y)
    assert starts[0] == 0 and starts[-1] == len(y)
    for a, b in zip(starts[:-1], starts[1:]):
        assert np.all(fit[a:b] == fit[a])
    assert np.all(np.diff(fit[starts[:-1]]) > 0)


def test_weighted_mean_preserved():
    rng = np.random.default_rng(2)
    y = rng.standard_normal(40)
    w = rng.uniform(0.5, 2.0, size=40)
    fit = pava(y, w)
    assert np.dot(w, fit) == pytest.approx(np.dot(w, y), rel=1e-12)


@settings(max_examples=150, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=1, max_size=40))
def test_idempotent_and_monotone(values):
    y = np.asarray(values)
    fit = pava(y)
    assert np.all(np.diff(fit) >= 0)
    np.testing.assert_allclose(pava(fit), fit, atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(
    st.integers(1, 30),
    st.integers(0, 2**32 - 1),
)
def test_projection_contraction(n, seed):
    rng = np.random.default_rng(seed)
    y1 = rng.standard_normal(n)
    y2 = rng.standard_normal(n)
    lhs = np.linalg.norm(pava(y1) - pava(y2))
    rhs = np.linalg.norm(y1 - y2)
    assert lhs <= rhs + 1e-10
