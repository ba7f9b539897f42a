"""The nonlinear matrix equation ``X = P0 - P1^T X^{-1} P1``.

Its maximal positive definite solution gives the spectral factor of a
degree-one para-Hermitian polynomial through ``H0 = chol(X)`` and
``H1 = P1^T H0^{-T}``. Two solvers are provided: the fixed-point iteration
(equivalent to Bauer's block Toeplitz Cholesky method) and Newton's method
on the Kronecker-product linearization.
"""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from . import densecore as dc
from . import kernels
from .errors import (
    DimensionMismatch,
    NotPositiveDefinite,
    SingularIterate,
    SingularJacobian,
    SingularSystem,
)

CONVERGED = "Converged"
MAX_ITERATIONS = "MaxIterations"
STALLED = "Stalled"
BREAKDOWN = "IndefiniteBreakdown"

_STATUS_NAMES = {
    kernels.STATUS_CONVERGED: CONVERGED,
    kernels.STATUS_MAXITER: MAX_ITERATIONS,
    kernels.STATUS_STALLED: STALLED,
    kernels.STATUS_BREAKDOWN: BREAKDOWN,
}

FPI_MAX_ITER = 10**6
NEWTON_MAX_ITER = 200


@dataclass
class NmeProblem:
    """Coefficients of ``X = P0 - P1^T X^{-1} P1``.

    ``P0`` must be symmetric positive definite. For a degree-``m`` problem
    pass the block-embedded coefficients from :func:`matpoly.block_embed`.
    """

    P0: np.ndarray
    P1: np.ndarray
    label: str = ""

    def __post_init__(self):
        self.P0 = dc.as_matrix(self.P0, "P0")
        self.P1 = dc.as_matrix(self.P1, "P1")
        d = self.P0.shape[0]
        if self.P0.shape != (d, d) or self.P1.shape != (d, d):
            raise DimensionMismatch(
                f"P0 and P1 must be square of equal size, got {self.P0.shape} and {self.P1.shape}"
            )
        asym = np.linalg.norm(self.P0 - self.P0.T)
        if asym > 1e-12 * np.linalg.norm(self.P0):
            raise ValueError(f"P0 is not symmetric: ||P0 - P0^T||_F = {asym:.3e}")
        self.P0 = dc.symmetrize(self.P0)
        dc.cholesky(self.P0)

    @property
    def d(self):
        return self.P0.shape[0]

    @classmethod
    def from_poly(cls, P, label=""):
        """Build the (block-embedded) problem for a para-Hermitian polynomial."""
        from .matpoly import block_embed

        P0, P1 = block_embed(P)
        return cls(P0, P1, label)


@dataclass
class SolverConfig:
    """Stopping rules and trace options.

    Parameters
    ----------
    tol_residual : float, optional
        Stop as Converged when ``eps_P <= tol_residual``. Default
        ``1e-13 * ||P0||_2``. Zero disables the test.
    tol_step : float, optional
        Stop as Stalled when the step norm falls to this value. Default
        ``eps * ||P0||_2`` (an upper bound for ``eps * ||X||_2``). Zero
        disables the test.
    max_iter : int, optional
        Iteration cap; default ``10**6`` for FPI and 200 for Newton.
    record_trace : bool
        Record per-iteration metrics.
    reference_H0, reference_X : ndarray, optional
        Known solution used for ``eps_H`` and ``eps_X``.
    stall_patience : int
        Stop as Stalled when the residual has not reached a new minimum for
        this many iterations. Zero disables the test.
    log_trace : bool
        FPI only: record every iteration below 200, then about 1% apart.
    jacobian_tol : float, optional
        Newton only: pivot threshold passed to :func:`newton_step`. With 0
        the iteration continues through a nearly singular Jacobian and
        typically ends in an indefinite iterate on high-order singular
        problems.
    """

    tol_residual: Optional[float] = None
    tol_step: Optional[float] = None
    max_iter: Optional[int] = None
    record_trace: bool = True
    reference_H0: Optional[np.ndarray] = None
    reference_X: Optional[np.ndarray] = None
    stall_patience: int = 0
    log_trace: bool = False
    jacobian_tol: Optional[float] = None

    def __post_init__(self):
        for name in ("tol_residual", "tol_step"):
            v = getattr(self, name)
            if v is not None and not v >= 0:
                raise ValueError(f"{name} must be non-negative, got {v}")
        if self.max_iter is not None and self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.stall_patience < 0:
            raise ValueError("stall_patience must be non-negative")

    def resolved(self, prob, default_max_iter):
        scale = dc.norm_2(prob.P0)
        tol_r = 1e-13 * scale if self.tol_residual is None else self.tol_residual
        tol_s = dc.EPS * scale if self.tol_step is None else self.tol_step
        max_iter = default_max_iter if self.max_iter is None else self.max_iter
        return tol_r, tol_s, int(max_iter)


@dataclass
class IterationTrace:
    """Per-iteration metrics as parallel arrays.

    ``eps_H`` and ``eps_X`` are ``None`` when no reference was supplied.
    """

    n: np.ndarray
    eps_P: np.ndarray
    eps_H: Optional[np.ndarray]
    step_norm: np.ndarray
    min_pivot: np.ndarray
    eps_X: Optional[np.ndarray] = None

    def __len__(self):
        return len(self.n)

    @property
    def records(self):
        out = []
        for i in range(len(self.n)):
            out.append({
                "n": int(self.n[i]),
                "eps_P": float(self.eps_P[i]),
                "eps_H": None if self.eps_H is None else float(self.eps_H[i]),
                "step_norm": float(self.step_norm[i]),
                "min_pivot": float(self.min_pivot[i]),
            })
        return out

    @classmethod
    def empty(cls):
        z = np.zeros(0)
        return cls(np.zeros(0, dtype=np.int64), z, None, z.copy(), z.copy(), None)


@dataclass
class FactorResult:
    X: np.ndarray
    H0: np.ndarray
    H1: np.ndarray
    trace: IterationTrace
    status: str
    iterations: int = 0
    method: str = ""
    extra: dict = field(default_factory=dict)


def _inv_apply(X, B):
    """``X^{-1} B`` for symmetric positive definite ``X``."""
    try:
        return dc.solve_linear(X, B)
    except SingularSystem as exc:
        raise SingularIterate(str(exc)) from exc


def residual_f(X, prob):
    """``f(X) = X - P0 + P1^T X^{-1} P1``, symmetrized."""
    X = dc.as_matrix(X, "X")
    if X.shape != prob.P0.shape:
        raise DimensionMismatch(f"X has shape {X.shape}, expected {prob.P0.shape}")
    return dc.symmetrize(X - prob.P0 + prob.P1.T @ _inv_apply(X, prob.P1))


def fpi_step(X, prob):
    """One fixed-point step ``P0 - P1^T X^{-1} P1``, symmetrized."""
    X = dc.as_matrix(X, "X")
    if X.shape != prob.P0.shape:
        raise DimensionMismatch(f"X has shape {X.shape}, expected {prob.P0.shape}")
    return dc.symmetrize(prob.P0 - prob.P1.T @ _inv_apply(X, prob.P1))


def extract_factors(X, prob):
    """``H0 = chol(X)`` and ``H1 = P1^T H0^{-T}``."""
    H0 = dc.cholesky(dc.symmetrize(X))
    # H1^T = H0^{-1} P1
    H1 = scipy.linalg.solve_triangular(H0, prob.P1, lower=True).T
    return H0, H1


def metric_eps_P(H0, H1, prob):
    """``||P0 - H0 H0^T - H1 H1^T||_2``."""
    return dc.norm_2(prob.P0 - H0 @ H0.T - H1 @ H1.T)


def metric_eps_H(H0, reference_H0):
    return dc.norm_2(dc.as_matrix(H0) - dc.as_matrix(reference_H0))


def _reference(cfg, d):
    refs = []
    for name in ("reference_H0", "reference_X"):
        r = getattr(cfg, name)
        if r is not None:
            r = dc.as_matrix(r, name)
            if r.shape != (d, d):
                raise DimensionMismatch(f"{name} has shape {r.shape}, expected {(d, d)}")
        refs.append(r)
    return refs


def _finish(prob, X, status, trace, iterations, method, extra=None):
    try:
        H0, H1 = extract_factors(X, prob)
    except NotPositiveDefinite:
        # only reachable when the starting iterate itself fails
        H0 = np.full_like(X, np.nan)
        H1 = np.full_like(X, np.nan)
    res = FactorResult(X, H0, H1, trace, status, iterations, method, extra or {})
    return res


def fpi_solve(prob, cfg=None, backend=None):
    """Fixed-point iteration from ``X0 = P0``.

    The hot loop runs in the compiled kernel when it is available. The
    returned ``X`` is the last positive definite iterate (FPI iterates
    decrease monotonically to the maximal solution), so on breakdown it is
    the iterate preceding the indefinite one.
    """
    cfg = cfg or SolverConfig()
    tol_r, tol_s, max_iter = cfg.resolved(prob, FPI_MAX_ITER)
    ref_H0, ref_X = _reference(cfg, prob.d)
    out = kernels.fpi_run(
        prob.P0, prob.P1, prob.P0, max_iter, tol_r, tol_s, cfg.stall_patience,
        ref_H0=ref_H0, ref_X=ref_X, log_trace=cfg.log_trace, backend=backend,
    )
    status = _STATUS_NAMES[out["status"]]
    if cfg.record_trace:
        trace = IterationTrace(
            out["n"], out["eps_P"],
            out["eps_H"] if ref_H0 is not None else None,
            out["step_norm"], out["min_pivot"],
            out["eps_X"] if ref_X is not None else None,
        )
    else:
        trace = IterationTrace.empty()
    n_last = int(out["n_last"])
    iterations = n_last - 1 if status == BREAKDOWN else n_last
    extra = {"n_best": int(out["n_best"]), "X_best": out["X_best"]}
    if status == BREAKDOWN:
        extra["breakdown_at"] = n_last
    return _finish(prob, out["X"], status, trace, iterations, "fpi", extra)


def newton_step(X, prob, jacobian_tol=None):
    """Newton update for ``f(X) = 0``.

    Solves ``[I - K kron K] vec(dX) = -vec(f(X))`` with ``K = P1^T X^{-1}``.
    ``jacobian_tol`` is the pivot threshold below which the system counts as
    singular (default ``d^2 * eps * max|J|``; 0 only rejects exact zeros).

    Returns
    -------
    dict
        ``X_next`` (symmetrized) and ``step_norm = ||dX||_F``.
    """
    X = dc.as_matrix(X, "X")
    d = prob.d
    K = _inv_apply(X, prob.P1).T  # (X^{-1} P1)^T = P1^T X^{-1} for symmetric X
    f = dc.symmetrize(X - prob.P0 + prob.P1.T @ K.T)
    J = np.eye(d * d) - dc.kron(K, K)
    try:
        dvec = dc.solve_linear(J, -dc.vec_of(f), singular_tol=jacobian_tol)
    except SingularSystem as exc:
        raise SingularJacobian(str(exc)) from exc
    dX = dc.unvec(dvec, d, d)
    return {"X_next": dc.symmetrize(X + dX), "step_norm": dc.norm_fro(dX)}


def newton_solve(prob, cfg=None):
    """Newton's method from ``X0 = P0``.

    Stops on the residual or step tolerance, the stall patience or the
    iteration cap. A numerically singular Jacobian is reported as Stalled
    and an indefinite iterate as IndefiniteBreakdown. The returned ``X`` is
    the iterate with the smallest residual.
    """
    cfg = cfg or SolverConfig()
    tol_r, tol_s, max_iter = cfg.resolved(prob, NEWTON_MAX_ITER)
    ref_H0, ref_X = _reference(cfg, prob.d)
    rec = {k: [] for k in ("n", "eps_P", "eps_H", "eps_X", "step_norm", "min_pivot")}
    X = prob.P0.copy()
    best_X, best_p, n_best = X, np.inf, 0
    status = MAX_ITERATIONS
    it = 0
    extra = {}
    while True:
        try:
            H0, H1 = extract_factors(X, prob)
        except NotPositiveDefinite as exc:
            status = BREAKDOWN
            extra["breakdown_at"] = it
            extra["pivot"] = exc.pivot_value
            break
        eps_p = metric_eps_P(H0, H1, prob)
        if eps_p < best_p:
            best_X, best_p, n_best = X, eps_p, it
        try:
            step = newton_step(X, prob, cfg.jacobian_tol)
        except (SingularJacobian, SingularIterate) as exc:
            step = None
            extra["reason"] = str(exc)
        if cfg.record_trace:
            rec["n"].append(it)
            rec["eps_P"].append(eps_p)
            rec["eps_H"].append(metric_eps_H(H0, ref_H0) if ref_H0 is not None else -1.0)
            rec["eps_X"].append(dc.norm_2(X - ref_X) if ref_X is not None else -1.0)
            rec["step_norm"].append(step["step_norm"] if step else 0.0)
            rec["min_pivot"].append(float(np.min(np.diag(H0)) ** 2))
        if eps_p <= tol_r:
            status = CONVERGED
            best_X = X
            break
        if step is None:
            status = STALLED
            break
        if step["step_norm"] <= tol_s:
            status = STALLED
            break
        if cfg.stall_patience > 0 and it - n_best >= cfg.stall_patience:
            status = STALLED
            break
        if it >= max_iter:
            status = MAX_ITERATIONS
            break
        X = step["X_next"]
        it += 1
    if cfg.record_trace:
        trace = IterationTrace(
            np.asarray(rec["n"], dtype=np.int64),
            np.asarray(rec["eps_P"]),
            np.asarray(rec["eps_H"]) if ref_H0 is not None else None,
            np.asarray(rec["step_norm"]),
            np.asarray(rec["min_pivot"]),
            np.asarray(rec["eps_X"]) if ref_X is not None else None,
        )
    else:
        trace = IterationTrace.empty()
    extra["n_best"] = n_best
    iterations = it - 1 if status == BREAKDOWN else it
    return _finish(prob, best_X, status, trace, iterations, "newton", extra)


def to_simplified(prob):
    """Normalize to ``X~ = I - A~^T X~^{-1} A~``.

    Returns ``(A_tilde, M)`` with ``P0 = M^T M`` and
    ``A_tilde = M^{-T} P1 M^{-1}``; ``X`` solves the original equation iff
    ``M^{-T} X M^{-1}`` solves the simplified one.
    """
    M = dc.cholesky(prob.P0).T
    Minv = scipy.linalg.solve_triangular(M, np.eye(prob.d), lower=False)
    return Minv.T @ prob.P1 @ Minv, M


def modified_to_standard(Q, A):
    """Map ``X = Q + A^T X^{-1} A`` to ``Y = R - B^T Y^{-1} B``.

    Returns ``(R, B, recover)`` where ``recover(Y)`` gives
    ``X = Y - A Q^{-1} A^T``.
    """
    Q = dc.as_matrix(Q, "Q")
    A = dc.as_matrix(A, "A")
    dc.cholesky(Q)
    QiA = dc.solve_linear(Q, A)
    QiAT = dc.solve_linear(Q, A.T)
    B = A @ QiA
    R = dc.symmetrize(Q + A.T @ QiA + A @ QiAT)
    shift = dc.symmetrize(A @ QiAT)

    def recover(Y):
        return dc.symmetrize(dc.as_matrix(Y) - shift)

    return R, B, recover


def existence_conditions(prob):
    """Spectral-radius tests for existence of a positive definite solution.

    Returns a dict with ``nec1 = rho(P1 P0^{-1})`` (needs ``<= 1/2``),
    ``nec2 = rho((P1 + P1^T) P0^{-1})`` and ``nec3 = rho((P1 - P1^T) P0^{-1})``
    (both need ``<= 1``) and ``sufficient = sqrt(||P1^T P0^{-1} P1 P0^{-1}||_2)``
    (``<= 1/2`` guarantees existence).
    """
    tol = 1e-12
    P0inv = dc.solve_linear(prob.P0, np.eye(prob.d))
    P1 = prob.P1
    nec1 = dc.spectral_radius(P1 @ P0inv)
    nec2 = dc.spectral_radius((P1 + P1.T) @ P0inv)
    nec3 = dc.spectral_radius((P1 - P1.T) @ P0inv)
    suff = float(np.sqrt(dc.norm_2(P1.T @ P0inv @ P1 @ P0inv)))
    return {
        "nec1": nec1, "nec2": nec2, "nec3": nec3, "sufficient": suff,
        "nec_ok": nec1 <= 0.5 + tol and nec2 <= 1 + tol and nec3 <= 1 + tol,
        "suff_ok": suff < 0.5 - tol,
    }


def bauer_factors(prob, n):
    """Last block row of the Cholesky factor of the block Toeplitz matrix.

    The matrix has ``n + 1`` block rows with ``P0`` on the diagonal, ``P1``
    above and ``P1^T`` below it. Its factor is block bidiagonal. The last
    diagonal block equals ``chol(X_n)`` for the fixed-point iterates started
    at ``X_0 = P0``, and the last subdiagonal block equals the ``H1`` built
    from ``X_{n-1}``. Computed with a banded Cholesky in ``O(n d^3)``.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    n = n + 1
    d = prob.d
    N = n * d
    bw = 2 * d - 1
    # lower band storage: ab[k, j] = T[j + k, j]
    ab = np.zeros((bw + 1, N))
    for i in range(n):
        for a in range(d):
            for b in range(a + 1):
                ab[a - b, i * d + b] = prob.P0[a, b]
            if i + 1 < n:
                for b in range(d):
                    ab[d + a - b, i * d + b] = prob.P1[b, a]
    try:
        cb = scipy.linalg.cholesky_banded(ab, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(-1, float("nan")) from exc
    s = (n - 1) * d
    H0 = np.zeros((d, d))
    H1 = np.zeros((d, d))
    for a in range(d):
        for b in range(a + 1):
            H0[a, b] = cb[a - b, s + b]
        if n > 1:
            for b in range(d):
                H1[a, b] = cb[d + a - b, s - d + b]
    return H0, H1
