import pickle

import numpy as np
import pytest

from isoci.errors import ExpressionError
from isoci.exprs import Expression


def test_basic_arithmetic():
    f = Expression("2*x1 + 2*x2 - 2")
    pts = np.array([[0.5, 0.5], [1.0, 0.0]])
    np.testing.assert_allclose(f(pts), [0.0, 0.0])


def test_x_alias_and_powers():
    f = Expression("10*x**5")
    np.testing.assert_allclose(f(np.array([[0.5]])), [10 * 0.5**5])
    g = Expression("pow(x1, 2)")
    np.testing.assert_allclose(g(np.array([[3.0]])), [9.0])


def test_exp_log():
    f = Expression("exp(2*x1)")
    np.testing.assert_allclose(f(np.array([[0.0], [0.5]])), [1.0, np.e])
    g = Expression("log(x1)")
    np.testing.assert_allclose(g(np.array([[1.0]])), [0.0])


def test_constant_expression_broadcasts():
    f = Expression("3.5")
    np.testing.assert_allclose(f(np.zeros((4, 2))), [3.5] * 4)


def test_unicode_operators():
    f = Expression("5·(x1 − 0.5)")
    np.testing.assert_allclose(f(np.array([[0.7]])), [1.0])


def test_rejects_unknown_names_and_calls():
    with pytest.raises(ExpressionError):
        Expression("__import__('os')")
    with pytest.raises(ExpressionError):
        Expression("sin(x1)")
    with pytest.raises(ExpressionError):
        Expression("y + 1")
    with pytest.raises(ExpressionError):
        Expression("x1 +")


def test_dimension_mismatch():
    f = Expression("x2")
    with pytest.raises(ExpressionError, match="dimension"):
        f(np.zeros((3, 1)))


def test_pickle_roundtrip():
    f = Expression("exp(x1 + x2)")
    g = pickle.loads(pickle.dumps(f))
    pts = np.array([[0.1, 0.2]])
    np.testing.assert_allclose(g(pts), f(pts))


def test_gradient():
    f = Expression("exp(2*x1)")
    grad = f.gradient([0.5])
    np.testing.assert_allclose(grad, [2 * np.exp(1.0)], rtol=1e-6)
    g = Expression("2*x1 + 5*x2")
    np.testing.assert_allclose(g.gradient([0.3, 0.3]), [2.0, 5.0], rtol=1e-8)
