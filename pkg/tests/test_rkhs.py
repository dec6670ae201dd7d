import numpy as np
import pytest

from kcontrol.rkhs import (KernelSpec, RkhsFunction, SupportSet, eval_function,
                           gram_matrix, kernel_eval)

SPEC = KernelSpec(scale=1.5)


def test_kernel_spec_rejects_bad_scale():
    for bad in (0.0, -1.0, np.nan, np.inf):
        with pytest.raises(ValueError):
            KernelSpec(scale=bad)


def test_kernel_eval_basic_values():
    x = np.array([1.0, 2.0])
    assert kernel_eval(x, x, SPEC) == 1.0
    y = np.array([2.0, 0.5])
    expected = np.exp(-(1.0 + 1.5**2) / (2 * 1.5**2))
    assert kernel_eval(x, y, SPEC) == pytest.approx(expected, rel=1e-14)
    assert kernel_eval(x, y, SPEC) == kernel_eval(y, x, SPEC)


def test_kernel_eval_dimension_mismatch():
    with pytest.raises(ValueError):
        kernel_eval(np.zeros(2), np.zeros(3), SPEC)


def test_gram_matrix_matches_elementwise():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((4, 3))
    Y = rng.standard_normal((6, 3))
    K = gram_matrix(X, Y, SPEC)
    assert K.shape == (4, 6)
    for i in range(4):
        for j in range(6):
            assert K[i, j] == pytest.approx(kernel_eval(X[i], Y[j], SPEC),
                                            rel=1e-14)


def test_gram_matrix_symmetric_unit_diagonal():
    rng = np.random.default_rng(1)
    X = rng.standard_normal((5, 2))
    K = gram_matrix(X, X, SPEC)
    assert np.array_equal(K, K.T)
    assert np.all(np.diag(K) == 1.0)


def test_gram_matrix_errors():
    with pytest.raises(ValueError):
        gram_matrix(np.zeros((0, 2)), np.zeros((3, 2)), SPEC)
    with pytest.raises(ValueError):
        gram_matrix(np.zeros((2, 2)), np.zeros((3, 4)), SPEC)


def test_support_set_caches_gram_and_rejects_duplicates():
    pts = np.array([[0.0, 0.0], [1.0, 0.0]])
    support = SupportSet.from_points(pts, SPEC)
    assert support.m == 2 and support.dim == 2
    assert np.allclose(support.gram, gram_matrix(pts, pts, SPEC))
    with pytest.raises(ValueError):
        SupportSet.from_points(np.array([[1.0, 2.0], [1.0, 2.0]]), SPEC)


def test_rkhs_function_evaluation():
    support = SupportSet.from_points(np.array([[0.0], [1.0], [2.0]]), SPEC)
    w = np.array([1.0, -2.0, 0.5])
    f = RkhsFunction(offset=0.3, weights=w, support=support)
    x = np.array([0.7])
    expected = 0.3 + sum(kernel_eval(x, p, SPEC) * wi
                         for p, wi in zip(support.points, w)) / 3.0
    assert eval_function(f, x) == pytest.approx(expected, rel=1e-13)
    batch = f.at(np.array([[0.7], [1.4]]))
    assert batch.shape == (2,)
    assert batch[0] == pytest.approx(expected, rel=1e-13)


def test_rkhs_function_weight_length_checked():
    support = SupportSet.from_points(np.array([[0.0], [1.0]]), SPEC)
    with pytest.raises(ValueError):
        RkhsFunction(offset=0.0, weights=np.zeros(3), support=support)
