import math

import numpy as np
import pytest
import mpmath
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from randeq.expm import expm, rowmat
from randeq.integrators import matrix_exponential
from randeq.systems import REMARK5_A, remark5_norm


def test_zero_matrix_gives_identity():
    assert np.array_equal(expm(np.zeros((3, 3))), np.eye(3))


def test_diagonal():
    np.testing.assert_allclose(matrix_exponential(np.diag([-1.0, -2.0]), 1.0),
                               np.diag([math.exp(-1), math.exp(-2)]), rtol=1e-14, atol=0)


def test_nilpotent():
    N = np.array([[0.0, 1.0], [0.0, 0.0]])
    np.testing.assert_allclose(expm(3.0 * N), [[1.0, 3.0], [0.0, 1.0]], rtol=0, atol=1e-15)


def test_rotation():
    t = 2.3
    R = expm(np.array([[0.0, -t], [t, 0.0]]))
    np.testing.assert_allclose(R, [[math.cos(t), -math.sin(t)], [math.sin(t), math.cos(t)]], atol=1e-14)


@pytest.mark.parametrize("t", np.linspace(0.0, 10.0, 11))
def test_rotating_example_norm(t):
    assert abs(np.linalg.norm(matrix_exponential(REMARK5_A, t)) - remark5_norm(t)) <= 1e-8


def test_rotating_example_bound():
    ts = np.linspace(0, 10, 2001)
    bound = 3 * math.sqrt(6 / 23)
    assert all(remark5_norm(t) <= bound * math.exp(-t / 2) + 1e-15 for t in ts)


matrices = arrays(np.float64, (3, 3), elements=st.floats(-5, 5, allow_nan=False, allow_infinity=False))


def _reference(A):
    with mpmath.workdps(40):
        return np.array(mpmath.expm(mpmath.matrix(A.tolist())).tolist(), dtype=float)


@settings(max_examples=60, deadline=None)
@given(matrices, st.floats(0.0, 10.0))
def test_matches_high_precision(A, t):
    At = A * t
    if np.linalg.norm(At, 1) > 50:
        At = At * (50 / np.linalg.norm(At, 1))
    ref = _reference(At)
    err = np.linalg.norm(expm(At) - ref) / np.linalg.norm(ref)
    assert err <= 1e-12


def test_nonnormal_case():
    A = 8.0 * np.array([[0.0, 0.125, 0.0], [1.0, 2.0, 0.0], [0.0, 0.0, 0.0]])
    ref = _reference(A)
    assert np.linalg.norm(expm(A) - ref) / np.linalg.norm(ref) <= 1e-13


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, (2, 2), elements=st.floats(-2, 2)), st.floats(0, 5), st.floats(0, 5))
def test_semigroup(A, s, t):
    if np.linalg.norm(A) * (s + t) > 20:
        return
    lhs = expm(A * s) @ expm(A * t)
    rhs = expm(A * (s + t))
    assert np.max(np.abs(lhs - rhs)) <= 1e-10 * max(1.0, np.abs(rhs).max())


@pytest.mark.parametrize("bad", [np.ones((2, 3)), np.array([[np.nan]]), np.ones(3)])
def test_rejects_bad_input(bad):
    with pytest.raises(ValueError):
        expm(bad)


def test_matrix_exponential_rejects_nonfinite_time():
    with pytest.raises(ValueError):
        matrix_exponential(np.eye(2), float("inf"))


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, (5, 3), elements=st.floats(-10, 10)), arrays(np.float64, (3, 3), elements=st.floats(-10, 10)))
def test_rowmat_is_row_independent(X, M):
    full = rowmat(X, M)
    for i in range(X.shape[0]):
        assert np.array_equal(full[i], rowmat(X[i], M))
    np.testing.assert_allclose(full, X @ M.T, rtol=1e-12, atol=1e-9)
