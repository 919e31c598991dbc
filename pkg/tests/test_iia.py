import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from levelcross.covmodel import get_model
from levelcross.iia import (
    LaplaceCov,
    clipped_covariance,
    clipped_evaluator,
    clipped_spectrum,
    diffusion2d_laplace,
    diffusion2d_series,
    iia_validity_check,
    laplace_cov,
    psi_from_cov,
    quasi_cdf,
    rational_continuation,
    switch_cov_laplace,
    switch_cov_laplace_sym,
    theta_iia,
)

BMS2 = get_model("BMS2")


def _exp_laplace(mu):
    # clipped covariance of a Poisson switch process: exp(-2t/mu)
    return LaplaceCov(lambda s: 1 / (s + 2 / mu), -2 / mu, "exact")


def test_arcsine_law_at_zero_level():
    for t in (0.0, 0.3, 1.7, 6.0):
        rho = float(BMS2(t))
        assert clipped_covariance(BMS2, 0.0, t) == pytest.approx(2 / math.pi * math.asin(rho), abs=1e-10)


@pytest.mark.parametrize("u, t", [(1.0, 2.0), (0.5, 0.4), (-0.7, 3.0)])
def test_clipped_covariance_two_routes(u, t):
    a = clipped_covariance(BMS2, u, t, method="quad")
    b = clipped_covariance(BMS2, u, t, method="owen")
    assert a == pytest.approx(b, abs=1e-9)


def test_clipped_covariance_at_lag_zero_is_variance():
    from scipy.special import ndtr

    u = 0.8
    F = ndtr(u)
    assert float(clipped_evaluator(BMS2, u)(0.0)) == pytest.approx(4 * F * (1 - F), abs=1e-12)


def test_clipped_spectrum_series_converges_to_cosine_route():
    w = np.linspace(0, 6, 601)
    cosine = clipped_spectrum(BMS2, w[::60], method="cosine")
    errs = [np.max(np.abs(clipped_spectrum(BMS2, w, method="series", n_terms=n)[::60] - cosine))
            for n in (8, 20, 40)]
    # the arcsine series converges slowly at the origin lag
    assert errs[0] > errs[1] > errs[2] and errs[2] < 0.01
    assert np.all(clipped_spectrum(BMS2, w, method="series") >= 0)


def test_clipped_spectrum_series_restrictions():
    with pytest.raises(ValueError):
        clipped_spectrum(BMS2, np.linspace(0, 1, 11), method="series", u=0.5)
    with pytest.raises(ValueError):
        clipped_spectrum(BMS2, np.array([0.0, 0.1, 0.5]), method="series")


def test_laplace_of_exponential():
    lc = laplace_cov(lambda t: math.exp(-t))
    assert lc.s_min == pytest.approx(-1.0, rel=1e-6)
    for s in (-0.5, 0.0, 0.3, 2.0, 40.0):
        assert lc(s) == pytest.approx(1 / (1 + s), rel=1e-9)
    with pytest.raises(ValueError):
        lc(-1.5)


def test_rational_continuation_of_exponential_mixture():
    lc = laplace_cov(lambda t: 0.5 * math.exp(-t) + 0.5 * math.exp(-3 * t))
    rc = rational_continuation(lc, 2, 2)
    for s in (-0.5, 0.5, 5.0):
        assert rc(s) == pytest.approx(0.5 / (1 + s) + 0.5 / (3 + s), rel=1e-6)


@settings(max_examples=30, deadline=None)
@given(mu=st.floats(0.5, 10.0), s=st.floats(0.01, 20.0))
def test_poisson_switch_roundtrip(mu, s):
    # exponential intervals of mean mu give Psi = 1/(1 + mu s)
    assert psi_from_cov(_exp_laplace(mu), mu, s) == pytest.approx(1 / (1 + mu * s), rel=1e-10)
    psi = lambda x: 1 / (1 + mu * x)
    assert switch_cov_laplace_sym(psi, mu, s) == pytest.approx(1 / (s + 2 / mu), rel=1e-10)
    assert switch_cov_laplace(psi, psi, mu, mu, s) == pytest.approx(1 / (s + 2 / mu), rel=1e-10)


def test_switch_cov_removable_point():
    mu = 2.0
    psi = lambda x: 1 / (1 + mu * x)
    assert switch_cov_laplace(psi, psi, mu, mu, 0.0) == pytest.approx(mu / 2, rel=1e-6)


def test_psi_roundtrip_through_switch_covariance():
    mu = 2 * math.pi
    LR = laplace_cov(clipped_evaluator(BMS2))
    for s in (0.05, 0.4, 3.0):
        psi = lambda x: psi_from_cov(LR, mu, x)
        assert switch_cov_laplace_sym(psi, mu, s) == pytest.approx(LR(s), rel=1e-9)


def test_theta_iia_poisson():
    assert theta_iia(_exp_laplace(3.0), 3.0) == pytest.approx(1 / 3, rel=1e-10)


def test_theta_iia_two_routes():
    # quadrature of the arcsine-clipped covariance vs the diffusion series
    quad = theta_iia(laplace_cov(clipped_evaluator(BMS2)), 2 * math.pi)
    series = diffusion2d_series(30).theta_L
    assert quad == pytest.approx(series, abs=5e-4)
    assert 0.184 < quad < 0.189


def test_diffusion_series_converges_to_quadrature():
    quad = laplace_cov(clipped_evaluator(BMS2))
    s = np.array([0.1, 0.5, 2.0])
    q = quad(s)
    errs = [np.max(np.abs(diffusion2d_laplace(L)(s) / q - 1)) for L in (20, 60, 150)]
    # truncation error decays roughly like 1/L
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 6e-3


@pytest.mark.parametrize("L", [0, 1, 2, 3, 5, 8])
def test_series_mass_and_partial_fractions(L):
    ap = diffusion2d_series(L)
    assert ap.total_mass == pytest.approx(1.0, abs=1e-8)
    assert ap.atom_at_zero == -1.0
    assert np.all(np.real(ap.poles) < 0)
    s = np.array([0.05, 0.7, 4.0])
    num = np.polyval(ap.numerator[::-1], s)
    den = np.polyval(ap.denominator[::-1], s)
    assert np.allclose(ap.psi(s), num / den - 1, rtol=1e-8, atol=1e-12)
    assert ap.psi(np.array([1e-9]))[0] == pytest.approx(1.0, abs=1e-6)


def test_complex_poles_appear_beyond_order_zero():
    assert np.isrealobj(diffusion2d_series(0).poles)
    assert np.any(np.abs(np.imag(diffusion2d_series(3).poles)) > 1e-6)


def test_order_zero_partial_fractions():
    ap = diffusion2d_series(0)
    a, b = ap.residues
    s1, s2 = ap.poles
    assert (a, b, s1, s2) == pytest.approx((0.2740, 1.4779, -0.2150, -2.0369), abs=1e-3)
    assert a / abs(s1) + b / abs(s2) - 1 == pytest.approx(1.0, abs=1e-3)


def test_series_order_validation():
    with pytest.raises(ValueError):
        diffusion2d_series(-1)


def test_quasi_cdf_shape():
    ap = diffusion2d_series(3)
    t = np.linspace(0, 3, 3001)
    F = quasi_cdf(ap, t)
    assert F[0] == pytest.approx(-1.0)
    assert np.min(np.diff(F)) < 0
    assert quasi_cdf(ap, 200.0) == pytest.approx(1.0, abs=1e-6)


def test_validity_detects_clipped_diffusion():
    res = iia_validity_check(clipped_evaluator(BMS2), np.linspace(0.01, 1, 100), kind="covariance")
    assert res.violated and 0.1 < res.first_violation < 0.3


def test_validity_routes_agree():
    s = [0.1, 0.2, 0.4]
    w = np.linspace(0, 30, 301)
    spec = iia_validity_check((w, clipped_spectrum(BMS2, w, method="cosine")), s)
    cov = iia_validity_check(clipped_evaluator(BMS2), s, kind="covariance")
    # the spectral route misses the clipped spectrum beyond w = 30
    assert np.allclose(spec.lhs, cov.lhs, atol=1e-2)
    assert np.allclose(spec.rhs, cov.rhs, atol=1e-2)
    assert list(spec.lhs < spec.rhs) == list(cov.lhs < cov.rhs) == [False, True, True]


def test_validity_detects_lh1():
    res = iia_validity_check(clipped_evaluator(get_model("LH1")), np.linspace(0.01, 1, 100), kind="covariance")
    assert res.violated


def test_validity_callable_and_atoms():
    res = iia_validity_check(lambda w: 1 / np.cosh(np.pi * min(w, 200.0)), [0.05, 0.1, 0.2])
    assert res.violated
    ok = iia_validity_check((np.array([1.0]), np.array([1.0])), [0.1, 0.3], kind="atoms")
    assert not ok.violated
    bad = iia_validity_check((np.array([1.0]), np.array([1.0])), [0.5], kind="atoms")
    assert bad.violated


def test_validity_rejects_bad_input():
    with pytest.raises(ValueError):
        iia_validity_check((np.array([0.0, 1.0]), np.array([1.0, -1.0])), [0.1])
    with pytest.raises(ValueError):
        iia_validity_check(lambda w: 1.0, [0.0])
