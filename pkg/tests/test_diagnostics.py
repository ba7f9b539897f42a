import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from msfactor import corpus, nme
from msfactor import densecore as dc
from msfactor import diagnostics as dg
from msfactor import matpoly as mp
from msfactor.errors import InsufficientData


@pytest.mark.parametrize("c", [0.3, 0.5, 0.71, 0.87])
def test_planted_linear(c):
    e = c ** np.arange(60)
    est = dg.estimate_rate(e)
    assert est.kind == dg.LINEAR
    assert est.factor == pytest.approx(c, rel=1e-10)
    assert est.linear_factor == est.factor


@pytest.mark.parametrize("c", [0.3, 0.5, 0.71, 0.87])
def test_planted_linear_with_noise(c):
    rng = np.random.default_rng(1)
    e = c ** np.arange(60) * np.exp(0.01 * rng.standard_normal(60))
    # noise can break strict monotonicity; fit the leading run only
    est = dg.estimate_rate(np.minimum.accumulate(e) * (1 - 1e-12 * np.arange(60)))
    assert est.kind == dg.LINEAR
    assert est.factor == pytest.approx(c, abs=0.02)


def test_sublinear_harmonic():
    e = 1.0 / (np.arange(2000) + 1)
    est = dg.estimate_rate(e)
    assert est.kind == dg.SUBLINEAR
    assert est.power == pytest.approx(1.0, abs=1e-10)


def test_sublinear_log_spaced():
    n = np.unique(np.round(np.logspace(0, 6, 200)).astype(int))
    e = 1.0 / (n + 1.0)
    est = dg.estimate_rate(e, n=n)
    assert est.kind == dg.SUBLINEAR
    assert est.power == pytest.approx(1.0, abs=1e-10)


def test_linear_halving():
    est = dg.estimate_rate(2.0 ** -np.arange(40))
    assert est.kind == dg.LINEAR and est.factor == pytest.approx(0.5)


def test_quadratic():
    e = 10.0 ** (-(2.0 ** np.arange(8)))
    assert dg.estimate_rate(e).kind == dg.QUADRATIC


def test_insufficient_data():
    with pytest.raises(InsufficientData):
        dg.estimate_rate([1.0, 0.5, 0.25])
    with pytest.raises(InsufficientData):
        dg.estimate_rate(0.5 ** np.arange(10), burn_in=5)
    with pytest.raises(InsufficientData):
        dg.estimate_rate(np.zeros(20))


def test_flat_sequence_is_stalled():
    est = dg.estimate_rate(np.full(20, 1e-8))
    assert est.kind == dg.STALLED


def test_window_stops_at_stall():
    e = np.concatenate([0.5 ** np.arange(30), np.full(20, 0.5**29)])
    est = dg.estimate_rate(e)
    assert est.window[1] == 30
    assert est.kind == dg.LINEAR


def test_rate_dict():
    d = dg.estimate_rate(0.5 ** np.arange(20)).to_dict()
    assert d["class"] == dg.LINEAR and d["power"] is None
    assert set(d) >= {"factor", "window", "fit_residual", "fits", "linear_factor"}


def test_expected_newton_factor():
    assert dg.expected_newton_factor(1) == 0.5
    assert dg.expected_newton_factor(2) == pytest.approx(np.sqrt(0.5))
    assert dg.expected_newton_factor(5) == pytest.approx(0.8706, abs=1e-4)
    vals = [dg.expected_newton_factor(p) for p in range(1, 20)]
    assert all(a < b < 1 for a, b in zip(vals, vals[1:]))
    with pytest.raises(ValueError):
        dg.expected_newton_factor(0)


def test_corpus_newton_factors_consistent():
    for i in (3, 4, 5, 6, 7):
        e = corpus.get(i)
        assert e.expected_newton_factor == dg.expected_newton_factor(e.newton_p)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_derivative_radius_is_square(d, seed):
    rng = np.random.default_rng(seed)
    R = rng.standard_normal((d, d))
    X = R @ R.T + np.eye(d)
    P1 = rng.standard_normal((d, d))
    rho_cl = dc.spectral_radius(dg.closed_loop(X, P1))
    rho_d = dc.spectral_radius(dg.fpi_derivative(X, P1))
    assert rho_d == pytest.approx(rho_cl**2, rel=1e-8)


def test_derivative_radius_nonsingular():
    e = corpus.get(1)
    c = dg.classify_singularity(e.problem(), e.reference_X())
    assert c["max_modulus"] < 1 and not c["is_singular"]
    assert c["derivative_radius"] == pytest.approx(c["max_modulus"] ** 2, rel=1e-8)


@pytest.mark.parametrize("i", range(1, 8))
def test_singularity_triple_agreement(i):
    e = corpus.get(i)
    X = e.reference_X()
    det_verdict = mp.circle_zeros(mp.det_poly(e.poly())).is_singular
    c = dg.classify_singularity(e.problem(), X)
    assert det_verdict == c["is_singular"] == c["derivative_singular"] == e.singular


def test_scalar_closed_loop():
    c = dg.classify_singularity(corpus.get(2).problem(), np.eye(1))
    assert c["unit_eigs"] == 1 and c["max_modulus"] == 1.0 and c["p_estimate"] == 1


def test_gdare_pencil_scalar():
    pen = dg.gdare_pencil(corpus.get(2).problem())
    np.testing.assert_array_equal(pen.M, [[0, 0, 1], [2, 1, -1], [1, 0, 0]])
    assert np.linalg.matrix_rank(pen.N) == 2


@pytest.mark.parametrize("i", range(1, 8))
def test_gdare_pencil_rank(i):
    prob = corpus.get(i).problem()
    pen = dg.gdare_pencil(prob)
    assert pen.M.shape == pen.N.shape == (3 * prob.d, 3 * prob.d)
    assert np.linalg.matrix_rank(pen.N) == 2 * prob.d


def test_pencil_eigenvalues_scalar():
    lam = dg.pencil_eigenvalues(dg.gdare_pencil(corpus.get(2).problem()))
    assert lam.size == 2
    np.testing.assert_allclose(lam, [1, 1], atol=1e-6)


def test_pencil_eigenvalues_reciprocal_pairs():
    lam = dg.pencil_eigenvalues(dg.gdare_pencil(corpus.get(1).problem()))
    # the block embedding adds eigenvalues at zero
    lam = sorted((z for z in lam if abs(z) > 1e-8), key=abs)
    k = len(lam)
    assert k % 2 == 0
    for a, b in zip(lam[: k // 2], reversed(lam[k // 2:])):
        assert abs(a * b - 1) < 1e-8 or abs(a * np.conj(b) - 1) < 1e-8


@pytest.mark.parametrize("i,pattern", [(1, "inside"), (2, "on"), (3, "on"), (4, "on"),
                                       (5, "on"), (6, "on"), (7, "mixed")])
def test_pencil_report_pattern(i, pattern):
    e = corpus.get(i)
    pts, pat = dg.pencil_unit_circle_report(e.problem(), e.reference_X())
    assert pat == pattern
    assert len(pts) == e.problem().d
    if i != 7:
        assert all(p["modulus"] <= 1 + 1e-6 for p in pts)
    else:
        # a defective unit eigenvalue splits into a ring of radius ~eps**(1/p)
        assert all(abs(p["modulus"] - 1) < 1e-2 for p in pts)


def test_stall_level():
    assert dg.stall_level([1.0, 0.5, 0.25, 0.3, 0.1]) == (0.25, 2)
    assert dg.stall_level([1.0, 0.5, 0.25]) == (0.25, 2)
    assert dg.stall_level([1.0, 1.0]) == (1.0, 0)
    with pytest.raises(InsufficientData):
        dg.stall_level([])


def test_prestall_window():
    eh = [1.0, 0.5, 0.25, 0.125, 0.2]
    ep = [1.0, 0.3, 0.1, 0.05, 0.01]
    assert dg.prestall_window(eh, ep) == (1, 4)
    # bounded oscillation of eps_P is tolerated, a jump is not
    assert dg.prestall_window(eh[:4], [1.0, 0.1, 0.3, 0.05]) == (1, 4)
    assert dg.prestall_window(eh[:4], [1.0, 0.1, 2.0, 0.05]) == (1, 2)


def test_loglog_slope():
    x = np.arange(1.0, 50.0)
    assert dg.loglog_slope(x, 3 * x**2) == pytest.approx(2.0)
    with pytest.raises(InsufficientData):
        dg.loglog_slope([1.0], [1.0])


def test_fpi_scalar_classified_sublinear():
    res = nme.fpi_solve(corpus.get(2).problem(), nme.SolverConfig(
        tol_residual=0, max_iter=10000, reference_X=np.eye(1)))
    est = dg.estimate_rate(res.trace.eps_X, burn_in=10)
    assert est.kind == dg.SUBLINEAR and est.power == pytest.approx(1.0, abs=0.05)
