import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from msfactor import corpus
from msfactor import densecore as dc
from msfactor.errors import DimensionMismatch, NotPositiveDefinite, SingularSystem

EPS = np.finfo(float).eps


def test_cholesky_small():
    L = dc.cholesky([[4.0, 2.0], [2.0, 5.0]])
    np.testing.assert_allclose(L, [[2, 0], [1, 2]], atol=1e-15)


def test_cholesky_identity():
    np.testing.assert_array_equal(dc.cholesky(np.eye(3)), np.eye(3))


def test_cholesky_closed_form_2x2():
    s7 = np.sqrt(7.0)
    X = np.array([[4, s7 + 1], [s7 + 1, 4]]) / 8
    L = dc.cholesky(X)
    expect = np.sqrt(2) / 8 * np.array([[4, 0], [s7 + 1, s7 - 1]])
    np.testing.assert_allclose(L, expect, atol=1e-15)


def test_cholesky_indefinite_reports_pivot():
    with pytest.raises(NotPositiveDefinite) as ei:
        dc.cholesky([[1.0, 2.0], [2.0, 1.0]])
    assert ei.value.pivot_index == 1
    assert ei.value.pivot_value < 0


def test_cholesky_rejects_nonsymmetric():
    with pytest.raises(ValueError):
        dc.cholesky([[1.0, 0.5], [0.0, 1.0]])


def test_as_matrix_rejects_nan():
    with pytest.raises(ValueError):
        dc.as_matrix([[1.0, np.nan]])


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_cholesky_roundtrip(d, seed):
    rng = np.random.default_rng(seed)
    R = rng.standard_normal((d, d))
    A = R @ R.T + d * np.eye(d)
    L = dc.cholesky(A)
    assert np.allclose(L, np.tril(L))
    assert np.all(np.diag(L) > 0)
    assert np.linalg.norm(A - L @ L.T) <= 10 * EPS * np.linalg.norm(A)


def test_solve_linear_examples():
    B = np.array([[1.0, 2.0], [3.0, 4.0]])
    np.testing.assert_array_equal(dc.solve_linear(np.eye(2), B), B)
    np.testing.assert_allclose(dc.solve_linear(2 * np.eye(2), np.eye(2)), 0.5 * np.eye(2))


def test_solve_linear_closed_loop_backmultiply():
    entry = corpus.get(3)
    X = entry.reference_X()
    P1 = entry.problem().P1
    Y = dc.solve_linear(X, P1)
    np.testing.assert_allclose(X @ Y, P1, atol=1e-12)


def test_solve_linear_singular():
    with pytest.raises(SingularSystem):
        dc.solve_linear([[1.0, 2.0], [2.0, 4.0]], np.eye(2))


def test_solve_linear_shape_mismatch():
    with pytest.raises(DimensionMismatch):
        dc.solve_linear(np.eye(2), np.ones((3, 1)))


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 10), st.integers(0, 2**32 - 1))
def test_solve_linear_backward_error(n, seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n)) + n * np.eye(n)
    B = rng.standard_normal((n, 3))
    Y = dc.solve_linear(A, B)
    assert np.linalg.norm(A @ Y - B) <= 1e-12 * max(1.0, np.linalg.norm(B))


def test_eigenvalues_examples():
    lam = np.sort(dc.eigenvalues(np.diag([1.0, 2.0, 3.0])).real)
    np.testing.assert_allclose(lam, [1, 2, 3])
    rot = dc.eigenvalues([[0.0, -1.0], [1.0, 0.0]])
    np.testing.assert_allclose(sorted(rot, key=lambda z: z.imag), [-1j, 1j], atol=1e-15)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 12), st.integers(0, 2**32 - 1))
def test_eigenvalues_trace_det(n, seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n))
    lam = dc.eigenvalues(A)
    assert abs(lam.sum() - np.trace(A)) <= 1e-8 * max(1.0, np.linalg.norm(A))
    det = np.linalg.det(A)
    if abs(det) > 1e-6:
        assert abs(np.prod(lam) - det) <= 1e-6 * abs(det)


def test_kron_examples():
    np.testing.assert_array_equal(dc.kron(np.eye(2), np.eye(2)), np.eye(4))
    np.testing.assert_array_equal(dc.kron([[1.0, 2.0]], [[3.0], [4.0]]), [[3, 6], [4, 8]])


mat22 = arrays(np.float64, (2, 2), elements=st.floats(-10, 10))


@settings(max_examples=1000, deadline=None)
@given(mat22, mat22, mat22)
def test_kron_vec_identity(A, B, C):
    lhs = dc.unvec(dc.kron(C.T, A) @ dc.vec_of(B), 2, 2)
    rhs = A @ B @ C
    scale = 1.0 + np.abs(A).max() * np.abs(B).max() * np.abs(C).max()
    assert np.max(np.abs(lhs - rhs)) <= 50 * EPS * scale


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 5), st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_kron_vec_rectangular(p, q, seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((p, q))
    B = rng.standard_normal((p + 1, q))
    C = rng.standard_normal((q, q))
    np.testing.assert_allclose(dc.kron(A, B) @ dc.vec_of(C), dc.vec_of(B @ C @ A.T), atol=1e-12)


def test_vec_and_unvec():
    v = dc.vec_of([[1.0, 3.0], [2.0, 4.0]])
    assert v.shape == (4, 1)
    np.testing.assert_array_equal(v.ravel(), [1, 2, 3, 4])
    A = np.arange(6.0).reshape(2, 3)
    np.testing.assert_array_equal(dc.unvec(dc.vec_of(A), 2, 3), A)
    assert np.linalg.norm(dc.vec_of(A)) == pytest.approx(dc.norm_fro(A), rel=1e-15)
    with pytest.raises(DimensionMismatch):
        dc.unvec(np.arange(5.0), 2, 3)


def test_norms():
    assert dc.norm_fro(np.eye(3)) == pytest.approx(np.sqrt(3))
    assert dc.spectral_radius(np.diag([0.5, -0.9])) == pytest.approx(0.9)
    assert dc.norm_2([[3.0, 0.0], [0.0, 4.0]]) == pytest.approx(4.0)
