"""Backend selection for the fixed-point hot loop.

The compiled extension ``_fpi_kernel`` is used when it imports; otherwise
the pure-Python ``_fpi_py`` implementation is used. Both expose
``fpi_run`` with the same signature and return dictionary.
"""
from . import _fpi_py

try:
    from . import _fpi_kernel as _compiled
except ImportError:  # extension not built
    _compiled = None

STATUS_CONVERGED = _fpi_py.STATUS_CONVERGED
STATUS_MAXITER = _fpi_py.STATUS_MAXITER
STATUS_STALLED = _fpi_py.STATUS_STALLED
STATUS_BREAKDOWN = _fpi_py.STATUS_BREAKDOWN

HAVE_COMPILED = _compiled is not None
_backend = "compiled" if HAVE_COMPILED else "python"


def available_backends():
    return ["compiled", "python"] if HAVE_COMPILED else ["python"]


def get_backend():
    return _backend


def set_backend(name):
    """Select ``"compiled"`` or ``"python"`` for subsequent solves."""
    global _backend
    if name not in ("compiled", "python"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "compiled" and not HAVE_COMPILED:
        raise RuntimeError("compiled FPI kernel is not built")
    _backend = name


def fpi_run(P0, P1, X0, max_iter, tol_residual, tol_step, patience,
            ref_H0=None, ref_X=None, log_trace=False, pivot_rel_tol=1e-14, backend=None):
    """Iterate ``X <- P0 - P1^T X^{-1} P1`` starting from ``X0``.

    Every step evaluates the factors of the current iterate, the residual
    ``eps_P`` (2-norm) and the step size, then applies the stopping rules in
    order: residual, step, patience (no new best residual in ``patience``
    steps, disabled when 0), iteration cap.

    Returns a dict with ``status`` (one of the ``STATUS_*`` codes),
    ``n_last``, ``n_best``, the last positive definite iterate ``X``, the
    best-residual iterate ``X_best`` and the recorded
    per-iteration arrays ``n``, ``eps_P``, ``eps_H``, ``eps_X``,
    ``step_norm``, ``min_pivot``. Missing reference errors are stored as -1.
    """
    name = backend or _backend
    impl = _compiled if name == "compiled" else _fpi_py
    if impl is None:
        raise RuntimeError("compiled FPI kernel is not built")
    return impl.fpi_run(
        P0, P1, X0, int(max_iter), float(tol_residual), float(tol_step), int(patience),
        ref_H0, ref_X, bool(log_trace), float(pivot_rel_tol),
    )
