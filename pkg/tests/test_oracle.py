import numpy as np
import pytest

from tedknn.oracle import (
    OracleTolerance,
    finite_difference_grad,
    knn_exhaustive,
    least_squares_closed_form,
    relative_error,
)


def test_knn_collinear():
    pts = [[0.0], [1.0], [3.0]]
    idx, dist = knn_exhaustive(pts, [0.0], 2)
    assert idx == [0, 1] and dist == [0.0, 1.0]


def test_knn_full_sort():
    pts = np.random.default_rng(0).normal(size=(8, 2))
    idx, dist = knn_exhaustive(pts, np.zeros(2), 8)
    assert sorted(idx) == list(range(8)) and dist == sorted(dist)
    with pytest.raises(ValueError):
        knn_exhaustive(pts, np.zeros(3), 1)


def test_fd_quadratic_and_constant():
    p = np.array([1.0, -2.0, 0.5])
    np.testing.assert_allclose(finite_difference_grad(lambda v: 0.5 * v @ v, p), p, atol=1e-8)
    np.testing.assert_array_equal(finite_difference_grad(lambda v: 3.0, p), 0.0)
    with pytest.raises(FloatingPointError):
        finite_difference_grad(lambda v: float("nan"), p)


def test_least_squares():
    y = np.array([1.0, 2.0, 3.0])
    np.testing.assert_allclose(least_squares_closed_form(np.eye(3), y), y)
    rng = np.random.default_rng(0)
    X = rng.normal(size=(20, 3))
    w = np.array([0.5, -1.0, 2.0])
    np.testing.assert_allclose(least_squares_closed_form(X, X @ w), w, atol=1e-10)
    # rank-deficient input falls back to a small ridge
    Xd = np.column_stack([X[:, 0], X[:, 0]])
    assert np.all(np.isfinite(least_squares_closed_form(Xd, X[:, 0])))


def test_tolerance_defaults_and_relative_error():
    t = OracleTolerance()
    assert (t.rel_grad, t.abs_pred, t.fd_step) == (1e-4, 1e-9, 1e-5)
    with pytest.raises(ValueError):
        OracleTolerance(fd_step=0)
    assert relative_error([1.0, 0.0], [1.1, 0.0]).tolist() == pytest.approx([0.1 / 1.1, 0.0])
