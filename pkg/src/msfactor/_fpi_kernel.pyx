# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled fixed-point loop for X <- P0 - P1^T X^{-1} P1.

Each step factors X = L L^T, forms W = L^{-1} P1 (so H1 = W^T) and sets
X_next = P0 - W^T W, which is symmetric by construction.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs

cnp.import_array()

DEF STATUS_CONVERGED = 0
DEF STATUS_MAXITER = 1
DEF STATUS_STALLED = 2
DEF STATUS_BREAKDOWN = 3


cdef double _sym_absmax_eig(double[:, ::1] s, Py_ssize_t n) noexcept nogil:
    """Largest |eigenvalue| of the symmetric matrix in ``s`` (destroyed)."""
    cdef Py_ssize_t p, q, k, sweep
    cdef double off, app, aqq, apq, theta, t, c, sn, tau, akp, akq, best, diag_scale
    if n == 1:
        return fabs(s[0, 0])
    for sweep in range(60):
        off = 0.0
        diag_scale = 0.0
        for p in range(n):
            diag_scale += s[p, p] * s[p, p]
            for q in range(p + 1, n):
                off += s[p, q] * s[p, q]
        if off == 0.0 or off <= 1e-36 * diag_scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = s[p, q]
                if apq == 0.0:
                    continue
                app = s[p, p]
                aqq = s[q, q]
                theta = (aqq - app) / (2.0 * apq)
                if theta >= 0:
                    t = 1.0 / (theta + sqrt(1.0 + theta * theta))
                else:
                    t = -1.0 / (-theta + sqrt(1.0 + theta * theta))
                c = 1.0 / sqrt(1.0 + t * t)
                sn = t * c
                tau = sn / (1.0 + c)
                s[p, p] = app - t * apq
                s[q, q] = aqq + t * apq
                s[p, q] = 0.0
                s[q, p] = 0.0
                for k in range(n):
                    if k != p and k != q:
                        akp = s[k, p]
                        akq = s[k, q]
                        s[k, p] = akp - sn * (akq + tau * akp)
                        s[p, k] = s[k, p]
                        s[k, q] = akq + sn * (akp - tau * akq)
                        s[q, k] = s[k, q]
    best = 0.0
    for p in range(n):
        if fabs(s[p, p]) > best:
            best = fabs(s[p, p])
    return best


cdef double _norm2_general(double[:, ::1] a, double[:, ::1] work, Py_ssize_t n) noexcept nogil:
    """Spectral norm of the square matrix ``a`` via eig(A^T A)."""
    cdef Py_ssize_t i, j, k
    cdef double acc
    for i in range(n):
        for j in range(i, n):
            acc = 0.0
            for k in range(n):
                acc += a[k, i] * a[k, j]
            work[i, j] = acc
            work[j, i] = acc
    return sqrt(_sym_absmax_eig(work, n))


cdef int _cholesky(double[:, ::1] x, double[:, ::1] L, Py_ssize_t n,
                   double rel_tol, double* min_pivot) noexcept nogil:
    """Lower Cholesky of the symmetric part of x. Returns failing index or -1."""
    cdef Py_ssize_t i, j, k
    cdef double acc, piv, dmax = 0.0
    for i in range(n):
        if x[i, i] > dmax:
            dmax = x[i, i]
    min_pivot[0] = 1e308
    for j in range(n):
        acc = x[j, j]
        for k in range(j):
            acc -= L[j, k] * L[j, k]
        if acc < min_pivot[0]:
            min_pivot[0] = acc
        if not (acc > rel_tol * dmax):
            return <int>j
        piv = sqrt(acc)
        L[j, j] = piv
        for i in range(j + 1, n):
            acc = 0.5 * (x[i, j] + x[j, i])
            for k in range(j):
                acc -= L[i, k] * L[j, k]
            L[i, j] = acc / piv
        for i in range(j):
            L[i, j] = 0.0
    return -1


def fpi_run(P0, P1, X0, long max_iter, double tol_residual, double tol_step,
            long patience, ref_H0=None, ref_X=None, bint log_trace=False,
            double pivot_rel_tol=1e-14):
    """Run the fixed-point iteration; see ``msfactor.kernels.fpi_run``."""
    cdef double[:, ::1] p0 = np.ascontiguousarray(P0, dtype=np.float64)
    cdef double[:, ::1] p1 = np.ascontiguousarray(P1, dtype=np.float64)
    cdef Py_ssize_t n = p0.shape[0]
    cdef double[:, ::1] x = np.array(X0, dtype=np.float64, order="C")
    cdef double[:, ::1] xn = np.zeros((n, n))
    cdef double[:, ::1] L = np.zeros((n, n))
    cdef double[:, ::1] W = np.zeros((n, n))
    cdef double[:, ::1] R = np.zeros((n, n))
    cdef double[:, ::1] work = np.zeros((n, n))
    cdef double[:, ::1] best_x = np.array(X0, dtype=np.float64, order="C")
    cdef double[:, ::1] prev_x = np.array(X0, dtype=np.float64, order="C")
    cdef double[:, ::1] rh0
    cdef double[:, ::1] rx
    cdef bint have_h0 = ref_H0 is not None
    cdef bint have_x = ref_X is not None
    if have_h0:
        rh0 = np.ascontiguousarray(ref_H0, dtype=np.float64)
    if have_x:
        rx = np.ascontiguousarray(ref_X, dtype=np.float64)

    rec_n = []
    rec_p = []
    rec_h = []
    rec_x = []
    rec_s = []
    rec_v = []

    cdef long it = 0, n_best = 0, next_rec = 0
    cdef Py_ssize_t i, j, k
    cdef double acc, eps_p, eps_h, eps_x, step, min_piv, best_p = 1e308
    cdef int fail, status = STATUS_MAXITER
    cdef bint record

    while True:
        fail = _cholesky(x, L, n, pivot_rel_tol, &min_piv)
        if fail >= 0:
            status = STATUS_BREAKDOWN
            break
        # W = L^{-1} P1 by forward substitution, column by column
        for j in range(n):
            for i in range(n):
                acc = p1[i, j]
                for k in range(i):
                    acc -= L[i, k] * W[k, j]
                W[i, j] = acc / L[i, i]
        # X_next = P0 - W^T W ; residual R = P0 - L L^T - W^T W
        step = 0.0
        for i in range(n):
            for j in range(i, n):
                acc = 0.0
                for k in range(n):
                    acc += W[k, i] * W[k, j]
                xn[i, j] = p0[i, j] - acc
                xn[j, i] = xn[i, j]
                acc = 0.0
                for k in range(i + 1):
                    acc += L[i, k] * L[j, k]
                R[i, j] = xn[i, j] - acc
                R[j, i] = R[i, j]
        for i in range(n):
            for j in range(n):
                step += (xn[i, j] - x[i, j]) * (xn[i, j] - x[i, j])
        step = sqrt(step)
        for i in range(n):
            for j in range(n):
                work[i, j] = R[i, j]
        eps_p = _sym_absmax_eig(work, n)

        if eps_p < best_p:
            best_p = eps_p
            n_best = it
            best_x[:, :] = x

        record = (not log_trace) or it < 200 or it >= next_rec
        if record:
            if log_trace:
                next_rec = it + 1 if it + 1 > <long>(it * 1.01) else <long>(it * 1.01)
            eps_h = -1.0
            eps_x = -1.0
            if have_h0:
                for i in range(n):
                    for j in range(n):
                        R[i, j] = L[i, j] - rh0[i, j]
                eps_h = _norm2_general(R, work, n)
            if have_x:
                for i in range(n):
                    for j in range(n):
                        R[i, j] = x[i, j] - rx[i, j]
                    for j in range(n):
                        work[i, j] = R[i, j]
                eps_x = _sym_absmax_eig(work, n)
            rec_n.append(it)
            rec_p.append(eps_p)
            rec_h.append(eps_h)
            rec_x.append(eps_x)
            rec_s.append(step)
            rec_v.append(min_piv)

        if eps_p <= tol_residual:
            status = STATUS_CONVERGED
            break
        if step <= tol_step:
            status = STATUS_STALLED
            break
        if patience > 0 and it - n_best >= patience:
            status = STATUS_STALLED
            break
        if it >= max_iter:
            status = STATUS_MAXITER
            break
        prev_x[:, :] = x
        x[:, :] = xn
        it += 1

    if status == STATUS_CONVERGED or status == STATUS_BREAKDOWN and it == 0:
        best_x[:, :] = x
    if status != STATUS_BREAKDOWN:
        prev_x[:, :] = x
    return {
        "status": status,
        "n_last": it,
        "n_best": n_best if status != STATUS_CONVERGED else it,
        "X": np.asarray(prev_x),
        "X_best": np.asarray(best_x),
        "n": np.asarray(rec_n, dtype=np.int64),
        "eps_P": np.asarray(rec_p, dtype=float),
        "eps_H": np.asarray(rec_h, dtype=float),
        "eps_X": np.asarray(rec_x, dtype=float),
        "step_norm": np.asarray(rec_s, dtype=float),
        "min_pivot": np.asarray(rec_v, dtype=float),
    }
