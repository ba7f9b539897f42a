"""Convergence-rate estimation, singularity analysis and the Riccati pencil."""
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import densecore as dc
from .errors import InsufficientData, SingularIterate, SingularSystem
from .matpoly import _cluster

QUADRATIC = "Quadratic"
LINEAR = "Linear"
SUBLINEAR = "Sublinear"
STALLED = "Stalled"
INCONCLUSIVE = "Inconclusive"

FIT_TOL = 0.15
MIN_POINTS = 8
CIRCLE_TOL = 1e-6
P_CLUSTER_TOL = 1e-2
# spread of a perturbed defective eigenvalue; see matpoly.CLUSTER_TOL
EIG_CLUSTER_TOL = 5e-2


@dataclass
class RateEstimate:
    """Outcome of :func:`estimate_rate`.

    ``factor`` is set for Linear, ``power`` for Sublinear. ``window`` is the
    half-open index range ``[start, stop)`` into the input sequence that was
    fitted and ``fits`` maps each hypothesis to its normalized residual.
    ``linear_factor`` is the fitted ratio of the linear model whatever the
    verdict.
    """

    kind: str
    window: tuple
    fit_residual: float
    factor: float = None
    power: float = None
    fits: dict = field(default_factory=dict)
    linear_factor: float = None

    def to_dict(self):
        return {
            "class": self.kind,
            "factor": self.factor,
            "power": self.power,
            "linear_factor": self.linear_factor,
            "window": list(self.window),
            "fit_residual": self.fit_residual,
            "fits": dict(self.fits),
        }


def _window_end(e, start, plateau_len=5, plateau_rel=10 * dc.EPS):
    """First index past ``start`` where the sequence stops strictly decreasing."""
    stop = len(e)
    for k in range(start, len(e) - 1):
        if e[k + 1] >= e[k] or e[k + 1] <= 0:
            stop = k + 1
            break
        if k + plateau_len < len(e):
            seg = e[k:k + plateau_len + 1]
            if np.max(np.abs(np.diff(seg))) < plateau_rel * e[k]:
                stop = k + 1
                break
    return stop


def _lstsq_residual(A, y):
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    r = y - A @ coef
    return coef, float(np.sqrt(np.mean(r**2)))


def estimate_rate(errors, burn_in=0, n=None, fit_tol=FIT_TOL):
    """Classify the convergence of a positive error sequence.

    Three models are fitted on the strictly decreasing stretch that starts
    at ``burn_in``:

    * linear, ``log e = a + n log c``;
    * sublinear, ``log e = a - s log(n + 1)``;
    * quadratic, ``log e[k+1] = 2 log e[k] + b`` (consecutive ``n`` only).

    Each RMS residual is divided by the range of ``log e`` over the window
    and the smallest one wins, provided it is below ``fit_tol``. A linear
    fit is only admissible for ``c < 0.95``.

    Parameters
    ----------
    errors : sequence of float
    burn_in : int
        Number of leading entries to skip.
    n : sequence of int, optional
        Iteration numbers of the entries (for log-spaced traces). Defaults
        to ``0, 1, 2, ...``.
    fit_tol : float

    Raises
    ------
    InsufficientData
        Fewer than 8 entries after ``burn_in`` or a non-positive entry
        inside the fitted stretch.
    """
    e = np.asarray(errors, dtype=float)
    nn = np.arange(e.size) if n is None else np.asarray(n, dtype=float)
    if nn.shape != e.shape:
        raise ValueError("n and errors must have the same length")
    if e.size - burn_in < MIN_POINTS:
        raise InsufficientData(f"need at least {MIN_POINTS} entries after burn-in, got {max(e.size - burn_in, 0)}")
    if not np.all(np.isfinite(e[burn_in:])) or e[burn_in] <= 0:
        raise InsufficientData("errors must be positive and finite")
    stop = _window_end(e, burn_in)
    window = (burn_in, stop)
    if stop - burn_in < 3:
        return RateEstimate(STALLED, window, 0.0)

    y = np.log(e[burn_in:stop])
    x = nn[burn_in:stop]
    span = float(y.max() - y.min())
    if span == 0.0:
        return RateEstimate(STALLED, window, 0.0)
    ones = np.ones_like(x)
    fits = {}
    params = {}

    coef, res = _lstsq_residual(np.column_stack([ones, x]), y)
    c = float(np.exp(coef[1]))
    fits[LINEAR] = res / span
    params[LINEAR] = c

    coef, res = _lstsq_residual(np.column_stack([ones, np.log(x + 1.0)]), y)
    fits[SUBLINEAR] = res / span
    params[SUBLINEAR] = float(-coef[1])

    if np.all(np.diff(x) == 1):
        d = y[1:] - 2.0 * y[:-1]
        fits[QUADRATIC] = float(np.sqrt(np.mean((d - d.mean()) ** 2))) / span

    linear_factor = params[LINEAR]
    admissible = {k: v for k, v in fits.items() if v <= fit_tol}
    if LINEAR in admissible and not 0.0 < params[LINEAR] < 0.95:
        del admissible[LINEAR]
    if SUBLINEAR in admissible and not params[SUBLINEAR] > 0:
        del admissible[SUBLINEAR]
    if not admissible:
        return RateEstimate(INCONCLUSIVE, window, min(fits.values()), fits=fits,
                            linear_factor=linear_factor)
    kind = min(admissible, key=admissible.get)
    est = RateEstimate(kind, window, admissible[kind], fits=fits, linear_factor=linear_factor)
    if kind == LINEAR:
        est.factor = params[LINEAR]
    elif kind == SUBLINEAR:
        est.power = params[SUBLINEAR]
    return est


def expected_newton_factor(p):
    """Newton's linear factor ``2**(-1/p)`` at a solution with Jordan chain length ``p``."""
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    return 2.0 ** (-1.0 / p)


def closed_loop(X, P1):
    """``X^{-1} P1``."""
    try:
        return dc.solve_linear(X, P1)
    except SingularSystem as exc:
        raise SingularIterate(str(exc)) from exc


def fpi_derivative(X, P1):
    """Jacobian of ``vec(X) -> vec(P0 - P1^T X^{-1} P1)`` at ``X``.

    Equals ``(X^{-T} P1)^T kron (P1^T X^{-1})``, i.e. ``K kron K`` with
    ``K = P1^T X^{-1}`` for symmetric ``X``.
    """
    K = closed_loop(X, P1).T
    return dc.kron(K, K)


def clustered_eigenvalues(A, cluster_tol=EIG_CLUSTER_TOL):
    """Eigenvalue cluster centroids and sizes.

    Roundoff splits a defective eigenvalue of index ``p`` into a ring of
    radius about ``eps**(1/p)``; the centroid is accurate to roundoff.
    """
    lam = dc.eigenvalues(A)
    out = []
    for g in _cluster(list(lam), cluster_tol):
        out.append((complex(np.mean(lam[g])), len(g)))
    return out


def clustered_spectral_radius(A, cluster_tol=EIG_CLUSTER_TOL):
    return max(abs(c) for c, _ in clustered_eigenvalues(A, cluster_tol))


def classify_singularity(prob, X_solution, circle_tol=CIRCLE_TOL, p_cluster_tol=P_CLUSTER_TOL):
    """Singularity verdict from the closed-loop matrix at a solution.

    Returns a dict with ``unit_eigs`` (eigenvalues within ``circle_tol`` of
    the unit circle after clustering), ``max_modulus`` (clustered spectral
    radius of the closed-loop matrix), ``derivative_radius`` (clustered
    spectral radius of the fixed-point derivative), ``p_estimate``
    (eigenvalues within ``p_cluster_tol`` of ``+1``) and ``is_singular``.
    """
    CL = closed_loop(X_solution, prob.P1)
    groups = clustered_eigenvalues(CL)
    max_mod = max(abs(c) for c, _ in groups)
    unit = sum(k for c, k in groups if abs(abs(c) - 1.0) <= circle_tol)
    lam = dc.eigenvalues(CL)
    p_est = int(np.sum(np.abs(lam - 1.0) <= p_cluster_tol))
    rho_d = clustered_spectral_radius(fpi_derivative(X_solution, prob.P1))
    return {
        "unit_eigs": int(unit),
        "max_modulus": float(max_mod),
        "derivative_radius": float(rho_d),
        "p_estimate": p_est,
        "is_singular": bool(max_mod >= 1.0 - circle_tol),
        "derivative_singular": bool(rho_d >= 1.0 - circle_tol),
    }


@dataclass
class PencilPair:
    M: np.ndarray
    N: np.ndarray


def gdare_pencil(prob):
    """Pencil ``M - lambda N`` of the Riccati form with ``E = B = C = I``, ``R = D = 0``.

    ``M = [[0, 0, I], [P0, I, -P1^T], [P1, 0, 0]]`` and
    ``N = [[I, 0, 0], [0, 0, 0], [0, -I, 0]]``. Its finite generalized
    eigenvalues are the zeros of ``det(P0 - lambda P1^T - lambda^{-1} P1)``.
    """
    d = prob.d
    Z = np.zeros((d, d))
    I = np.eye(d)
    M = np.block([[Z, Z, I], [prob.P0, I, -prob.P1.T], [prob.P1, Z, Z]])
    N = np.block([[I, Z, Z], [Z, Z, Z], [Z, -I, Z]])
    return PencilPair(M, N)


def pencil_eigenvalues(pencil):
    """Finite generalized eigenvalues of the pencil (QZ via scipy)."""
    lam = scipy.linalg.eigvals(pencil.M, pencil.N)
    return lam[np.isfinite(lam)]


def _where(lam, circle_tol):
    r = abs(lam)
    if r < 1.0 - circle_tol:
        return "inside"
    if r > 1.0 + circle_tol:
        return "outside"
    return "on"


def pencil_unit_circle_report(prob, X_solution, circle_tol=CIRCLE_TOL):
    """Closed-loop eigenvalues with their position relative to the unit circle.

    Returns ``(points, pattern)``. Each point is a dict with ``re``, ``im``,
    ``modulus`` and ``where`` (inside, on or outside by ``circle_tol``).
    ``pattern`` is ``"inside"`` or ``"on"`` when all points agree and
    ``"mixed"`` otherwise.
    """
    lam = dc.eigenvalues(closed_loop(X_solution, prob.P1))
    pts = []
    for z in sorted(lam, key=lambda v: (round(v.real, 12), v.imag)):
        pts.append({
            "re": float(z.real), "im": float(z.imag), "modulus": float(abs(z)),
            "where": _where(z, circle_tol),
        })
    kinds = {p["where"] for p in pts}
    pattern = kinds.pop() if len(kinds) == 1 else "mixed"
    return pts, pattern


def stall_level(eps_H, window=5, min_progress=0.1):
    """Error where the initial decrease of ``eps_H`` levels off.

    The run ends at the first step that fails to decrease, or whose log
    decrease is below ``min_progress`` times the median of the previous
    ``window`` log decreases. Past this point the error is dominated by
    roundoff and wanders; a lucky dip below the plateau is not an
    attainable accuracy. Returns ``(level, index)``.
    """
    e = np.asarray(eps_H, dtype=float)
    if e.size == 0:
        raise InsufficientData("empty error sequence")
    drops = []
    k = 0
    while k + 1 < e.size and 0 < e[k + 1] < e[k]:
        d = np.log(e[k] / e[k + 1])
        if len(drops) >= window and d < min_progress * np.median(drops[-window:]):
            break
        drops.append(d)
        k += 1
    return float(e[k]), k


def prestall_window(eps_H, eps_P, burn_in=1, jump=10.0):
    """Index range ``[burn_in, stop)`` before the stall of a solver trace.

    The window ends where ``eps_H`` first fails to decrease or where
    ``eps_P`` first exceeds ``jump`` times its running minimum. The jump
    margin tolerates the bounded even/odd oscillation of ``eps_P`` caused
    by a closed-loop eigenvalue at -1, but not the growth of roundoff
    noise past the stall.
    """
    eh = np.asarray(eps_H, dtype=float)
    ep = np.asarray(eps_P, dtype=float)
    stop = len(eh)
    run_min = np.inf
    for k in range(burn_in, len(eh)):
        if ep[k] <= 0 or eh[k] <= 0:
            stop = k
            break
        if k > burn_in and (eh[k] >= eh[k - 1] or ep[k] > jump * run_min):
            stop = k
            break
        run_min = min(run_min, ep[k])
    return burn_in, stop


def loglog_slope(x, y):
    """Least-squares slope of ``log y`` against ``log x``."""
    lx = np.log(np.asarray(x, dtype=float))
    ly = np.log(np.asarray(y, dtype=float))
    if lx.size < 2 or np.ptp(lx) == 0:
        raise InsufficientData("need at least two distinct points")
    return float(np.polyfit(lx, ly, 1)[0])
