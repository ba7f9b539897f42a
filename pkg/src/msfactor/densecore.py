"""Dense real-matrix kernel.

Matrices are plain ``numpy.ndarray`` objects of dtype float64. The adjoint
of a real matrix is its transpose, which is all the corpus needs.
"""
import warnings

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, NoConvergence, NotPositiveDefinite, SingularSystem

EPS = np.finfo(float).eps
MAX_EIG_DIM = 64


def as_matrix(a, name="matrix"):
    """Validate and return a finite 2-D float64 array (copy-free when possible)."""
    arr = np.asarray(a, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    return arr


def symmetrize(a):
    a = np.asarray(a, dtype=float)
    return 0.5 * (a + a.T)


def _require_square(a, name):
    if a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {a.shape}")


def cholesky(a, pivot_tol=None, symmetry_tol=None):
    """Lower-triangular Cholesky factor ``L`` with ``A = L L^T``.

    The input is symmetrized before factoring. A pivot at or below
    ``pivot_tol`` (default ``1e-14 * max(diag(A))``) raises
    :class:`NotPositiveDefinite`.
    """
    a = as_matrix(a)
    _require_square(a, "A")
    scale = np.linalg.norm(a)
    if symmetry_tol is None:
        symmetry_tol = 1e-12 * scale
    asym = np.linalg.norm(a - a.T)
    if asym > symmetry_tol:
        raise ValueError(f"matrix is not symmetric: ||A - A^T||_F = {asym:.3e}")
    a = symmetrize(a)
    n = a.shape[0]
    if pivot_tol is None:
        pivot_tol = 1e-14 * max(float(np.max(np.diag(a))), 0.0) if n else 0.0
    L = np.zeros_like(a)
    for j in range(n):
        pivot = a[j, j] - L[j, :j] @ L[j, :j]
        if not pivot > pivot_tol:
            raise NotPositiveDefinite(j, float(pivot))
        ljj = np.sqrt(pivot)
        L[j, j] = ljj
        if j + 1 < n:
            L[j + 1:, j] = (a[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / ljj
    return L


def solve_linear(a, b, singular_tol=None):
    """Solve ``A Y = B`` by LU with partial pivoting.

    Raises :class:`SingularSystem` when a pivot of ``U`` is smaller in
    magnitude than ``singular_tol`` (default ``n * eps * max|A|``).
    """
    a = as_matrix(a, "A")
    _require_square(a, "A")
    b_arr = np.asarray(b, dtype=float)
    vector = b_arr.ndim == 1
    b2 = b_arr.reshape(-1, 1) if vector else as_matrix(b_arr, "B")
    if b2.shape[0] != a.shape[0]:
        raise DimensionMismatch(f"B has {b2.shape[0]} rows, expected {a.shape[0]}")
    n = a.shape[0]
    if singular_tol is None:
        singular_tol = n * EPS * float(np.max(np.abs(a))) if n else 0.0
    with warnings.catch_warnings():
        # exact zero pivots are reported below as SingularSystem
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(a, check_finite=False)
    diag = np.abs(np.diag(lu))
    k = int(np.argmin(diag)) if n else 0
    if n and not diag[k] > singular_tol:
        raise SingularSystem(k, float(lu[k, k]))
    y = scipy.linalg.lu_solve((lu, piv), b2, check_finite=False)
    return y.ravel() if vector else y


def eigenvalues(a):
    """Eigenvalues of a square real matrix as a complex array (unordered)."""
    a = as_matrix(a)
    _require_square(a, "A")
    if a.shape[0] > MAX_EIG_DIM:
        raise DimensionMismatch(f"eigenvalue routine limited to dimension {MAX_EIG_DIM}")
    try:
        return np.linalg.eigvals(a).astype(complex)
    except np.linalg.LinAlgError as exc:
        raise NoConvergence(iterations=30 * a.shape[0]) from exc


def kron(a, b):
    return np.kron(as_matrix(a, "A"), as_matrix(b, "B"))


def vec_of(a):
    """Stack the columns of ``a`` into a column vector."""
    a = as_matrix(a)
    return a.reshape(-1, 1, order="F").copy()


def unvec(v, rows, cols):
    v = np.asarray(v, dtype=float).ravel()
    if v.size != rows * cols:
        raise DimensionMismatch(f"cannot reshape vector of length {v.size} to {rows}x{cols}")
    return v.reshape(rows, cols, order="F").copy()


def norm_fro(a):
    return float(np.linalg.norm(as_matrix(a)))


def norm_2(a):
    """Largest singular value, from the eigenvalues of ``A^T A``."""
    a = as_matrix(a)
    if a.size == 0:
        return 0.0
    lam = np.linalg.eigvalsh(a.T @ a)
    return float(np.sqrt(max(lam[-1], 0.0)))


def spectral_radius(a):
    lam = eigenvalues(a)
    return float(np.max(np.abs(lam))) if lam.size else 0.0
