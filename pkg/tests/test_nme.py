import warnings

import numpy as np
import pytest

from msfactor import corpus, nme
from msfactor import densecore as dc
from msfactor import diagnostics as dg
from msfactor.errors import DimensionMismatch, NotPositiveDefinite

EPS = np.finfo(float).eps
SINGULAR = (2, 3, 4, 5, 6, 7)


def scalar_problem(p0, p1):
    return nme.NmeProblem(np.array([[p0]]), np.array([[p1]]))


def test_problem_validation():
    with pytest.raises(DimensionMismatch):
        nme.NmeProblem(np.eye(2), np.eye(3))
    with pytest.raises(ValueError):
        nme.NmeProblem(np.array([[1.0, 1.0], [0.0, 1.0]]), np.eye(2))
    with pytest.raises(NotPositiveDefinite):
        nme.NmeProblem(-np.eye(2), np.eye(2))


def test_config_validation():
    with pytest.raises(ValueError):
        nme.SolverConfig(tol_residual=-1.0)
    with pytest.raises(ValueError):
        nme.SolverConfig(max_iter=0)


def test_residual_examples():
    assert nme.residual_f(np.array([[1.0]]), scalar_problem(2, 1))[0, 0] == 0.0
    e3 = corpus.get(3)
    assert np.abs(nme.residual_f(e3.reference_X(), e3.problem())).max() <= 1e-13
    prob = corpus.get(5).problem()
    np.testing.assert_allclose(
        nme.residual_f(prob.P0, prob),
        prob.P1.T @ np.linalg.solve(prob.P0, prob.P1), atol=1e-15)


def test_fpi_step_examples():
    assert nme.fpi_step(np.array([[2.0]]), scalar_problem(2, 1))[0, 0] == 1.5
    e3 = corpus.get(3)
    np.testing.assert_allclose(nme.fpi_step(e3.reference_X(), e3.problem()), e3.reference_X(), atol=1e-12)
    prob = nme.NmeProblem(np.diag([2.0, 3.0]), np.zeros((2, 2)))
    np.testing.assert_array_equal(nme.fpi_step(np.eye(2) * 7, prob), prob.P0)


def test_fpi_scalar_sequence():
    prob = corpus.get(2).problem()
    cfg = nme.SolverConfig(tol_residual=0, tol_step=0, max_iter=2000, reference_X=np.eye(1))
    res = nme.fpi_solve(prob, cfg)
    n = res.trace.n
    # x_n - 1 = 1/(n+1); stored near 1, so only absolute accuracy is available
    assert np.max(np.abs(res.trace.eps_X - 1.0 / (n + 1))) < 1e-12


def test_fpi_nonsingular_linear():
    entry = corpus.get(1)
    res = nme.fpi_solve(entry.problem(), nme.SolverConfig(reference_H0=entry.reference_H0()))
    assert res.status in (nme.CONVERGED, nme.STALLED)
    np.testing.assert_allclose(res.X, entry.reference_X(), atol=1e-12)
    est = dg.estimate_rate(res.trace.eps_H)
    assert est.kind == dg.LINEAR and est.factor < 0.95


def test_fpi_singular_converges_to_known_solution():
    entry = corpus.get(3)
    cfg = nme.SolverConfig(tol_residual=0, tol_step=0, max_iter=10**6, log_trace=True,
                           reference_H0=entry.reference_H0())
    res = nme.fpi_solve(entry.problem(), cfg)
    np.testing.assert_allclose(res.X, [[1, 5], [5, 26]], atol=1e-4)
    # eps_H ~ 1/n on the way to its ~1e-7 stall
    assert 1e-7 < res.trace.eps_H[-1] < 1e-5


def test_fpi_returns_factor_consistent_with_x():
    res = nme.fpi_solve(corpus.get(4).problem())
    assert np.linalg.norm(res.H0 @ res.H0.T - res.X) <= 10 * EPS * np.linalg.norm(res.X)
    assert np.allclose(res.H0, np.tril(res.H0))


def test_trace_n_strictly_increasing():
    for log in (False, True):
        res = nme.fpi_solve(corpus.get(2).problem(),
                            nme.SolverConfig(tol_residual=0, max_iter=5000, log_trace=log))
        assert res.trace.n[0] == 0
        assert np.all(np.diff(res.trace.n) > 0)
    assert res.trace.eps_H is None


def test_newton_step_scalar_formula():
    prob = corpus.get(2).problem()
    for x in (2.0, 1.5, 1.1, 1.01):
        out = nme.newton_step(np.array([[x]]), prob)
        assert out["X_next"][0, 0] == pytest.approx(2 - 2 / (x + 1), rel=1e-14)


def test_newton_step_hand_values():
    out = nme.newton_step(np.array([[2.0]]), scalar_problem(2, 1))
    assert out["X_next"][0, 0] == pytest.approx(4 / 3, rel=1e-15)
    assert out["step_norm"] == pytest.approx(2 / 3, rel=1e-15)


def test_newton_step_small_at_solution():
    e1 = corpus.get(1)
    out = nme.newton_step(e1.reference_X(), e1.problem())
    assert out["step_norm"] <= 1e-14


def test_newton_nonsingular():
    entry = corpus.get(1)
    res = nme.newton_solve(entry.problem(), nme.SolverConfig(reference_H0=entry.reference_H0()))
    assert res.status == nme.CONVERGED
    assert res.iterations <= 6
    assert res.trace.eps_H[-1] <= 1e-15


def test_newton_scalar_law():
    prob = corpus.get(2).problem()
    res = nme.newton_solve(prob, nme.SolverConfig(tol_residual=0, max_iter=20, reference_X=np.eye(1)))
    e = res.trace.eps_X
    n = res.trace.n
    e0 = e[0]
    law = e0 / ((2.0**n - 1) * e0 + 2.0**n)
    # the Jacobian is about 2 e_n, so residual rounding is amplified by 1/e_n
    assert np.all(np.abs(e[:15] - law[:15]) <= 10 * EPS * (1 + 1 / law[:15]))


def test_newton_high_order_stall():
    entry = corpus.get(7)
    res = nme.newton_solve(entry.problem(), nme.SolverConfig(
        tol_residual=0, stall_patience=20, reference_H0=entry.reference_H0()))
    assert res.status in (nme.STALLED, nme.BREAKDOWN)
    eh = res.trace.eps_H
    assert np.all(np.diff(res.trace.eps_P[:10]) < 0)
    assert 1e-3 <= dg.stall_level(eh)[0] <= 1e-1


def test_newton_high_order_breakdown_without_jacobian_check():
    entry = corpus.get(7)
    res = nme.newton_solve(entry.problem(), nme.SolverConfig(
        tol_residual=0, tol_step=0, jacobian_tol=0.0))
    assert res.status == nme.BREAKDOWN
    assert res.extra["breakdown_at"] > 64


def test_extract_factors_examples():
    s2 = np.sqrt(2.0)
    H0, H1 = nme.extract_factors(corpus.get(4).reference_X(), corpus.get(4).problem())
    np.testing.assert_allclose(H0, 0.5 * np.array([[s2, 0], [-1, 1]]), atol=1e-15)
    np.testing.assert_allclose(H1, 0.5 * np.array([[s2, 0], [1, 1]]), atol=1e-15)
    H0, _ = nme.extract_factors(corpus.get(6).reference_X(), corpus.get(6).problem())
    np.testing.assert_allclose(H0, s2 / 4 * np.array([[2, 0], [np.sqrt(3), 1]]), atol=1e-15)
    prob = nme.NmeProblem(np.eye(2), np.zeros((2, 2)))
    H0, H1 = nme.extract_factors(np.eye(2), prob)
    np.testing.assert_array_equal(H0, np.eye(2))
    np.testing.assert_array_equal(H1, np.zeros((2, 2)))


def test_extract_factors_cross_identity():
    for i in range(1, 8):
        prob = corpus.get(i).problem()
        X = corpus.get(i).reference_X()
        H0, H1 = nme.extract_factors(X, prob)
        assert np.linalg.norm(prob.P1.T - H1 @ H0.T) <= 10 * EPS * max(1.0, np.linalg.norm(prob.P1))


def test_metrics():
    entry = corpus.get(5)
    H0, H1 = entry.reference_H()
    assert nme.metric_eps_P(H0, H1, entry.problem()) <= 1e-15
    assert nme.metric_eps_H(H0, H0) == 0.0
    prob = scalar_problem(2, 1)
    for e in (1e-2, 1e-3, 1e-4):
        x = 1 + e
        H0, H1 = nme.extract_factors(np.array([[x]]), prob)
        direct = abs(2 - x - 1 / x)
        assert nme.metric_eps_P(H0, H1, prob) == pytest.approx(direct, rel=1e-6)
        assert direct == pytest.approx(e**2, rel=2 * e)


def test_converged_factor_identity():
    for i in (1, 4, 5, 6):
        prob = corpus.get(i).problem()
        for solve in (nme.fpi_solve, nme.newton_solve):
            res = solve(prob)
            if res.status == nme.CONVERGED:
                err = np.linalg.norm(prob.P1.T - res.H1 @ res.H0.T)
                assert err <= 10 * EPS * np.linalg.norm(prob.P1)


def test_fpi_newton_agree_nonsingular():
    prob = corpus.get(1).problem()
    a = nme.fpi_solve(prob)
    b = nme.newton_solve(prob)
    assert np.linalg.norm(a.X - b.X, 2) <= 1e-6


@pytest.mark.slow
def test_fpi_newton_agree_double_zero():
    # both solvers run to their attainable accuracy
    prob = corpus.get(3).problem()
    a = nme.fpi_solve(prob, nme.SolverConfig(tol_residual=0, tol_step=0, max_iter=2 * 10**7,
                                             log_trace=True))
    b = nme.newton_solve(prob, nme.SolverConfig(tol_residual=0, stall_patience=20))
    assert np.linalg.norm(a.X - b.X, 2) <= 1e-6


@pytest.mark.parametrize("i", range(1, 7))
def test_bauer_oracle_equivalence(i):
    prob = corpus.get(i).problem()
    H0b, H1b = nme.bauer_factors(prob, 500)
    cfg = dict(tol_residual=0, tol_step=0, record_trace=False)
    a = nme.fpi_solve(prob, nme.SolverConfig(max_iter=500, **cfg))
    b = nme.fpi_solve(prob, nme.SolverConfig(max_iter=499, **cfg))
    assert np.linalg.norm(H0b - a.H0) <= 1e-9
    assert np.linalg.norm(H1b - nme.extract_factors(b.X, prob)[1]) <= 1e-9


def test_bauer_small_n_exact():
    # n = 0: a single block, chol(P0)
    prob = corpus.get(3).problem()
    H0, _ = nme.bauer_factors(prob, 0)
    np.testing.assert_allclose(H0, dc.cholesky(prob.P0), atol=1e-14)
    H0, H1 = nme.bauer_factors(prob, 1)
    X1 = nme.fpi_step(prob.P0, prob)
    np.testing.assert_allclose(H0, dc.cholesky(X1), atol=1e-12)
    np.testing.assert_allclose(H1, nme.extract_factors(prob.P0, prob)[1], atol=1e-12)


def test_newton_quadratic_steps():
    res = nme.newton_solve(corpus.get(1).problem())
    s = res.trace.step_norm
    # s[n] is the step taken from iterate n; s[4] is at roundoff level
    C = [s[n + 1] / s[n] ** 2 for n in range(0, 3)]
    assert all(s[n + 1] <= 0.2 * s[n] ** 2 for n in range(0, 3))
    assert max(C) / min(C) < 10


def test_to_simplified_examples():
    At, M = nme.to_simplified(nme.NmeProblem(np.eye(2), np.array([[0.1, 0.2], [0.0, 0.3]])))
    np.testing.assert_allclose(M, np.eye(2))
    np.testing.assert_allclose(At, [[0.1, 0.2], [0.0, 0.3]])
    At, M = nme.to_simplified(scalar_problem(2, 1))
    assert M[0, 0] == pytest.approx(np.sqrt(2))
    assert At[0, 0] == pytest.approx(0.5)


def test_to_simplified_roundtrip():
    prob = corpus.get(3).problem()
    At, M = nme.to_simplified(prob)
    cfg = nme.SolverConfig(tol_residual=0, tol_step=0, max_iter=20000, record_trace=False)
    Xt = nme.fpi_solve(nme.NmeProblem(np.eye(2), At), cfg).X
    X = nme.fpi_solve(prob, cfg).X
    np.testing.assert_allclose(M.T @ Xt @ M, X, atol=1e-12 * np.linalg.norm(X))


@pytest.mark.parametrize("i", (2, 3, 4, 5, 6))
def test_simplified_form_preserves_definiteness(i):
    prob = corpus.get(i).problem()
    At, M = nme.to_simplified(prob)
    cfg = nme.SolverConfig(max_iter=20000, record_trace=False)
    Xt = nme.fpi_solve(nme.NmeProblem(np.eye(prob.d), At), cfg).X
    X = nme.fpi_solve(prob, cfg).X
    assert np.all(np.linalg.eigvalsh(Xt) > 0)
    assert np.all(np.linalg.eigvalsh(M.T @ Xt @ M) > 0)
    Minv = np.linalg.inv(M)
    assert np.all(np.linalg.eigvalsh(Minv.T @ X @ Minv) > 0)


def test_modified_to_standard_zero():
    Q = np.diag([2.0, 3.0])
    R, B, recover = nme.modified_to_standard(Q, np.zeros((2, 2)))
    np.testing.assert_array_equal(B, np.zeros((2, 2)))
    np.testing.assert_allclose(R, Q)
    np.testing.assert_allclose(recover(Q), Q)


def test_modified_to_standard_scalar():
    R, B, recover = nme.modified_to_standard(np.array([[2.0]]), np.array([[1.0]]))
    assert B[0, 0] == pytest.approx(0.5) and R[0, 0] == pytest.approx(3.0)
    # maximal root of y = 3 - 1/(4y)
    y = (3 + np.sqrt(8)) / 2
    x = recover(np.array([[y]]))[0, 0]
    assert x == pytest.approx(2 + 1 / x, rel=1e-14)


def test_modified_to_standard_random():
    rng = np.random.default_rng(0)
    Rm = rng.standard_normal((2, 2))
    Q = Rm @ Rm.T + 2 * np.eye(2)
    A = 0.5 * rng.standard_normal((2, 2))
    R, B, recover = nme.modified_to_standard(Q, A)
    Y = nme.fpi_solve(nme.NmeProblem(R, B), nme.SolverConfig(record_trace=False)).X
    X = recover(Y)
    assert np.linalg.norm(X - Q - A.T @ np.linalg.solve(X, A)) <= 1e-10


def test_existence_scalar_equality():
    c = nme.existence_conditions(corpus.get(2).problem())
    assert c["nec1"] == pytest.approx(0.5) and c["sufficient"] == pytest.approx(0.5)
    assert c["nec_ok"]


@pytest.mark.parametrize("i", SINGULAR)
def test_existence_singular_examples(i):
    c = nme.existence_conditions(corpus.get(i).problem())
    assert c["nec_ok"] and not c["suff_ok"]


def test_existence_decoupled():
    c = nme.existence_conditions(nme.NmeProblem(np.eye(2), np.zeros((2, 2))))
    assert c["nec1"] == c["nec2"] == c["nec3"] == c["sufficient"] == 0
    assert c["nec_ok"] and c["suff_ok"]


@pytest.mark.parametrize("i", range(1, 8))
def test_fpi_residual_monotone_flagged(i):
    entry = corpus.get(i)
    res = nme.fpi_solve(entry.problem(), nme.SolverConfig(
        max_iter=100000, reference_H0=entry.reference_H0()))
    ep, eh = res.trace.eps_P, res.trace.eps_H
    _, stop = dg.prestall_window(eh, ep)
    rises = [int(res.trace.n[k]) for k in range(3, stop - 1) if ep[k + 1] > ep[k]]
    if rises:
        # observed on the +-1 double-zero example: eps_P alternates with n
        warnings.warn(f"example {i}: eps_P rises after n = {rises[:5]}", UserWarning)
    assert res.status != nme.BREAKDOWN
