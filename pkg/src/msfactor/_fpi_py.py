"""Pure-Python fallback for the compiled fixed-point kernel.

Same algorithm and return contract as ``_fpi_kernel.fpi_run``; slower by
roughly two orders of magnitude on the corpus sizes.
"""
import numpy as np
from scipy.linalg import solve_triangular

STATUS_CONVERGED = 0
STATUS_MAXITER = 1
STATUS_STALLED = 2
STATUS_BREAKDOWN = 3


def _cholesky(x, rel_tol):
    n = x.shape[0]
    dmax = max(float(np.max(np.diag(x))), 0.0)
    L = np.zeros_like(x)
    min_pivot = np.inf
    for j in range(n):
        acc = x[j, j] - L[j, :j] @ L[j, :j]
        min_pivot = min(min_pivot, acc)
        if not acc > rel_tol * dmax:
            return None, min_pivot
        L[j, j] = np.sqrt(acc)
        L[j + 1:, j] = (0.5 * (x[j + 1:, j] + x[j, j + 1:]) - L[j + 1:, :j] @ L[j, :j]) / L[j, j]
    return L, min_pivot


def _sym_absmax(s):
    return float(np.max(np.abs(np.linalg.eigvalsh(s))))


def fpi_run(P0, P1, X0, max_iter, tol_residual, tol_step, patience,
            ref_H0=None, ref_X=None, log_trace=False, pivot_rel_tol=1e-14):
    p0 = np.asarray(P0, dtype=float)
    p1 = np.asarray(P1, dtype=float)
    x = np.array(X0, dtype=float)
    best_x = x.copy()
    prev_x = x.copy()
    best_p = np.inf
    n_best = 0
    next_rec = 0
    recs = {k: [] for k in ("n", "eps_P", "eps_H", "eps_X", "step_norm", "min_pivot")}
    it = 0
    while True:
        L, min_piv = _cholesky(x, pivot_rel_tol)
        if L is None:
            status = STATUS_BREAKDOWN
            break
        W = solve_triangular(L, p1, lower=True)
        xn = p0 - W.T @ W
        xn = 0.5 * (xn + xn.T)
        R = xn - L @ L.T
        step = float(np.linalg.norm(xn - x))
        eps_p = _sym_absmax(0.5 * (R + R.T))

        if eps_p < best_p:
            best_p = eps_p
            n_best = it
            best_x = x.copy()

        if (not log_trace) or it < 200 or it >= next_rec:
            if log_trace:
                next_rec = max(it + 1, int(it * 1.01))
            eps_h = -1.0
            eps_x = -1.0
            if ref_H0 is not None:
                D = L - ref_H0
                eps_h = float(np.sqrt(_sym_absmax(D.T @ D)))
            if ref_X is not None:
                eps_x = _sym_absmax(x - ref_X)
            recs["n"].append(it)
            recs["eps_P"].append(eps_p)
            recs["eps_H"].append(eps_h)
            recs["eps_X"].append(eps_x)
            recs["step_norm"].append(step)
            recs["min_pivot"].append(min_piv)

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
        prev_x = x
        x = xn
        it += 1

    if status == STATUS_CONVERGED or (status == STATUS_BREAKDOWN and it == 0):
        best_x = x.copy()
    if status != STATUS_BREAKDOWN:
        prev_x = x
    out = {
        "status": status,
        "n_last": it,
        "n_best": n_best if status != STATUS_CONVERGED else it,
        "X": np.array(prev_x),
        "X_best": best_x,
    }
    out["n"] = np.asarray(recs.pop("n"), dtype=np.int64)
    out.update({k: np.asarray(v, dtype=float) for k, v in recs.items()})
    return out
