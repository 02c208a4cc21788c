import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import spherical_jn

from nsbf_dirac.evaluator import (
    SpectralPoint,
    evaluate,
    g_via_f,
    leading_coefficients,
    residuals,
    unit_f_at,
)
from nsbf_dirac.grid import finite_difference
from nsbf_dirac.nsbf import compute_beta, compute_gamma
from nsbf_dirac.oscillator import OscillatorParams, dirac_problem, exact_regular_pair
from nsbf_dirac.pipeline import prepare, seeds_for
from nsbf_dirac.potential import DiracProblem
from nsbf_dirac.special_functions import d_constant
from oracles import ode_unit_solution, random_potential, relative_sup


def _coeffs(problem, N):
    return compute_gamma(seeds_for(problem), problem.grid, problem.p, N)


@pytest.fixture(scope="module")
def free():
    pr = DiracProblem.from_function(lambda r: 0 * r, 1.0, 4.0, 2001)
    return _coeffs(pr, 4)


@pytest.fixture(scope="module", params=[1.0, 1.5])
def smooth(request):
    p, dp = random_potential(11)
    pr = DiracProblem.from_function(p, request.param, 3.0, 6001, dp)
    return pr, p, _coeffs(pr, 40)


def test_free_closed_form(free):
    r = free.r
    for w in (0.5, 3.0, 12.0):
        s = evaluate(free, SpectralPoint.symmetric(w))
        assert np.max(np.abs(s.f + np.sin(w * r))) < 1e-12
        assert np.max(np.abs(s.g - w * r * spherical_jn(1, w * r))) < 1e-12


def test_free_closed_form_asymmetric(free):
    r = free.r
    pt = SpectralPoint(2.0, 8.0)  # omega = 4
    s = evaluate(free, pt)
    assert np.max(np.abs(s.f + 0.5 * np.sin(4.0 * r))) < 1e-12
    assert np.max(np.abs(s.g - 4.0 * r * spherical_jn(1, 4.0 * r))) < 1e-12


def test_against_ode_oracle(smooth):
    pr, p, c = smooth
    for pt in (SpectralPoint(1.0, 1.0), SpectralPoint(2.0, 50.0), SpectralPoint.symmetric(10.0)):
        s = evaluate(c, pt, normalization="unit")
        f_ref, g_ref = ode_unit_solution(p, pr.kappa, pt.omega1, pt.omega2, pr.r)
        assert relative_sup(s.f, f_ref) < 1e-8
        assert relative_sup(s.g, g_ref) < 1e-8


def test_regular_is_unit_times_leading_coefficient(smooth):
    pr, _, c = smooth
    pt = SpectralPoint(3.0, 2.0)
    reg, unit = evaluate(c, pt), evaluate(c, pt, normalization="unit")
    cf, _ = leading_coefficients(pr.kappa, pt)
    assert np.allclose(reg.f, cf * unit.f, rtol=1e-13, atol=1e-15)
    assert np.allclose(reg.g, cf * unit.g, rtol=1e-13, atol=1e-15)


def test_origin_asymptotics(smooth):
    pr, _, c = smooth
    pt = SpectralPoint(2.0, 3.0)
    cf, cg = leading_coefficients(pr.kappa, pt)
    s = evaluate(c, pt, indices=[1, 2])
    r1 = s.r[0]
    assert s.f[0] / (cf * r1 ** pr.kappa) == pytest.approx(1.0, abs=1e-3)
    assert s.g[0] / (cg * r1 ** (pr.kappa + 1)) == pytest.approx(1.0, abs=1e-3)


def test_residuals_small(smooth):
    pr, _, c = smooth
    s = evaluate(c, SpectralPoint.symmetric(10.0))
    r1, r2 = s.sup_residuals()
    amp = max(np.max(np.abs(s.f)), np.max(np.abs(s.g)))
    assert max(r1, r2) < 1e-7 * amp
    a, b = residuals(s, c.p, pr.kappa)
    assert np.array_equal(a, s.residual1) and np.array_equal(b, s.residual2)


def test_g_via_f(smooth):
    pr, _, c = smooth
    s = evaluate(c, SpectralPoint(2.0, 5.0))
    g, gp = g_via_f(s, c.p, pr.kappa)
    assert relative_sup(g[1:], s.g[1:]) < 1e-7
    assert relative_sup(gp[1:], s.g_prime[1:]) < 1e-6


def test_derivative_series_match_finite_differences(smooth):
    pr, _, c = smooth
    s = evaluate(c, SpectralPoint.symmetric(5.0))
    h = pr.grid.h
    inner = (pr.r >= 0.3) & (pr.r <= 2.7)
    assert relative_sup(finite_difference(s.f, h)[inner], s.f_prime[inner]) < 1e-8
    assert relative_sup(finite_difference(s.g, h)[inner], s.g_prime[inner]) < 1e-8


def test_residual_is_sensitive_to_coefficients(smooth):
    pr, _, c = smooth
    pt = SpectralPoint.symmetric(5.0)
    base = max(evaluate(c, pt).sup_residuals())
    fam = c.g_family
    beta = fam.beta.copy()
    beta[0] *= 1.01
    bad = dataclasses.replace(c, g_family=dataclasses.replace(fam, beta=beta))
    assert max(evaluate(bad, pt).sup_residuals()) >= 10 * base


def test_negative_lambda_against_ode(smooth):
    pr, p, c = smooth
    for pt in (SpectralPoint(1.0, -4.0), SpectralPoint(-3.0, 30.0)):
        s = evaluate(c, pt, normalization="unit")
        f_ref, g_ref = ode_unit_solution(p, pr.kappa, pt.omega1, pt.omega2, pr.r)
        assert relative_sup(s.f, f_ref) < 1e-8
        assert relative_sup(s.g, g_ref) < 1e-8
    with pytest.raises(ValueError):
        evaluate(c, SpectralPoint(1.0, -4.0))


def test_zero_lambda_limit(smooth):
    pr, _, c = smooth
    ps = seeds_for(pr)
    s0 = evaluate(c, SpectralPoint(1.0, 0.0), normalization="unit")
    assert relative_sup(s0.f, ps.f0) < 1e-12
    assert np.max(np.abs(s0.g)) == 0.0
    near = evaluate(c, SpectralPoint(1.0, 1e-9), normalization="unit")
    assert relative_sup(near.f, s0.f) < 1e-8
    assert unit_f_at(c, 0.0) == pytest.approx(ps.f0[-1], rel=1e-12)
    with pytest.raises(ValueError):
        evaluate(c, SpectralPoint(1.0, 0.0))


def test_unit_f_at_matches_evaluate(smooth):
    _, _, c = smooth
    for lam in (-9.0, 2.0, 400.0):
        s = evaluate(c, SpectralPoint(1.0, lam), normalization="unit", derivatives=False)
        assert unit_f_at(c, lam, -1) == pytest.approx(s.f[-1], rel=1e-13, abs=1e-300)
        assert unit_f_at(c, lam, 100) == pytest.approx(s.f[100], rel=1e-13, abs=1e-300)


def test_series_is_even_in_omega():
    # S = [w r j_0 + sum beta_n j_{1+2n}] / w is even in w; with omega2 fixed
    # the prefactor w**2 is even too.
    p, dp = random_potential(5)
    pr = DiracProblem.from_function(p, 1.0, 2.0, 2001, dp)
    c = _coeffs(pr, 20)
    r, k = pr.r, 1

    def raw_f(w):
        beta = c.beta(2)
        s = w * r * spherical_jn(k - 1, w * r)
        for n in range(beta.shape[0]):
            s = s + beta[n] * spherical_jn(k + 2 * n, w * r)
        return -(w ** (k + 1) / 7.0) * s / w ** k  # omega2 = 7 fixed

    w = 7.0
    ref = evaluate(c, SpectralPoint.symmetric(w), derivatives=False).f
    assert relative_sup(raw_f(w), ref) < 1e-12
    assert relative_sup(raw_f(-w), ref) < 1e-12


@settings(max_examples=20, deadline=None)
@given(lam=st.floats(-50, 200), scale=st.floats(0.1, 10.0))
def test_unit_normalization_depends_on_lambda_only(lam, scale):
    # At fixed omega**2 the unit f is unchanged and g scales with 1/omega1.
    c = _SHARED
    a = evaluate(c, SpectralPoint(1.0, lam), normalization="unit")
    b = evaluate(c, SpectralPoint(scale, lam / scale), normalization="unit")
    assert np.allclose(b.f, a.f, rtol=1e-12, atol=1e-14 * np.max(np.abs(a.f)))
    assert np.allclose(b.g * scale, a.g, rtol=1e-10, atol=1e-12 * (1 + np.max(np.abs(a.g))))


_p, _dp = random_potential(2)
_SHARED = _coeffs(DiracProblem.from_function(_p, 2.0, 2.0, 801, _dp), 15)


def test_oscillator_exact_pair_on_inner_range():
    par = OscillatorParams(epsilon=-1)
    prep = prepare(dirac_problem(par, 20.0, 20001), p=par.potential, p_prime=par.potential_prime)
    c = prep.coeffs
    keep = c.r <= 6.0
    for n in (1, 5):
        lam = 4.0 * n + 0.0  # E**2 - m**2 for j = 5/2, eps = -1
        pt = SpectralPoint(2.0, lam / 2.0)
        s = evaluate(c, pt, indices=np.flatnonzero(keep))
        f_ex, g_ex = exact_regular_pair(par, n, s.r, pt, normalization="regular")
        # 20001 nodes on [0, 20]; finer grids reach 1e-11 for n = 1
        assert relative_sup(s.f, f_ex) < 5e-7
        assert relative_sup(s.g, g_ex) < 5e-7


def test_argument_errors(free):
    with pytest.raises(ValueError):
        evaluate(free, SpectralPoint(1.0, 1.0), normalization="bogus")
    pr = DiracProblem.from_function(lambda r: 0 * r, 1.0, 1.0, 101)
    beta_only = compute_beta(seeds_for(pr), pr.grid, pr.p, 3)
    with pytest.raises(ValueError):
        evaluate(beta_only, SpectralPoint(1.0, 1.0))
    s = evaluate(beta_only, SpectralPoint(1.0, 1.0), derivatives=False)
    with pytest.raises(ValueError):
        s.sup_residuals()
    with pytest.raises(ValueError):
        g_via_f(s, pr.p, 1.0)


def test_d_constant_matches_small_argument():
    from oracles import mp_spherical_jn
    x = 1e-6
    for k in (0.0, 0.5, 1.5, 3.0):
        assert d_constant(k) == pytest.approx(mp_spherical_jn(k, x) / x ** k, rel=1e-10)
