import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import ndtr

from levelcross.covmodel import get_model
from levelcross.crossings import (
    IRREGULAR_K,
    Density1D,
    PersistenceCurve,
    crossing_rate,
    delay_relations,
    delay_relations_asymmetric,
    first_passage_density,
    interval_density,
    interval_pdf,
    interval_tail,
    irregular_limit,
    joint_interval_pdf,
    persistence_exponent,
    persistence_QT,
    tri_interval_pdf,
    triple_crossing_intensity,
)
from levelcross.mvnexp import MvnOptions, MvnProblem, mvn_probability

FAST = MvnOptions(speed=6)
FASTER = MvnOptions(speed=7)
DT = math.pi / 16


@pytest.fixture(scope="module")
def wh2():
    return get_model("WH2", normalized=True)


@pytest.fixture(scope="module")
def wh2_density(wh2):
    return interval_density(wh2, 5 * math.pi, dt=DT, opts=FAST)


def test_crossing_rate_closed_form():
    m = get_model("LH4", normalized=True)
    assert crossing_rate(m) == pytest.approx(1 / (2 * math.pi))
    assert crossing_rate(m, 1.2) == pytest.approx(math.exp(-0.72) / (2 * math.pi))
    assert m.mean_interval == pytest.approx(math.pi)


def test_first_passage_at_origin():
    m = get_model("BMS2", normalized=True)
    assert first_passage_density(m, 0.0) == (pytest.approx(1 / math.pi), 0.0)
    v, e = first_passage_density(m, 0.05, dt=0.025, opts=FAST)
    assert v == pytest.approx(1 / math.pi, abs=0.01)


def test_first_passage_normalization():
    m = get_model("BMS2", normalized=True)
    t = np.arange(0, 40.01, 0.5)
    f = [first_passage_density(m, a, dt=0.25, opts=FASTER)[0] for a in t]
    assert np.trapezoid(f, t) == pytest.approx(1.0, abs=0.02)


def test_tail_matches_integrated_density(wh2, wh2_density):
    d = wh2_density
    tail = d.normalization - d.cdf()
    err_tail = np.trapezoid(d.err, d.t) - np.concatenate([[0.0], np.cumsum(0.5 * (d.err[1:] + d.err[:-1]) * DT)])
    for a in (1.0, 2.0, 3.0, 4.0):
        i = int(round(a / DT))
        v, e = interval_tail(wh2, d.t[i], dt=DT, opts=FAST)
        assert abs(v - tail[i]) <= e + err_tail[i] + abs(d.normalization - 1)
    assert interval_tail(wh2, 0.0) == (1.0, 0.0)


def test_mean_forward_delay_identity(wh2):
    # mu f_A(t) equals the interval tail
    for a in (4 * DT, 16 * DT):
        fa, ea = first_passage_density(wh2, a, dt=DT, opts=FAST)
        tl, et = interval_tail(wh2, a, dt=DT, opts=FAST)
        assert abs(wh2.mean_interval * fa - tl) <= math.pi * ea + et + 1e-12


def test_rice_consistency_small_grid(wh2_density):
    assert wh2_density.normalization == pytest.approx(1.0, abs=0.03)
    assert wh2_density.mean == pytest.approx(math.pi, rel=0.01)
    assert np.all(wh2_density.f >= -wh2_density.err)


@pytest.mark.parametrize("u", [0.0, 0.5])
def test_mean_interval_above_level(wh2, u):
    d = interval_density(wh2, 6 * math.pi, dt=DT, u=u, side="above", opts=FAST)
    assert d.normalization == pytest.approx(1.0, abs=0.03)
    # mean length above u equals P(X > u) / upcrossing rate
    assert d.mean == pytest.approx((1 - ndtr(u)) / crossing_rate(wh2, u), rel=0.01)


def test_irregular_limit():
    m = get_model("LH5", normalized=True)
    mo = m.moments()
    assert irregular_limit(m) == pytest.approx(IRREGULAR_K * mo.C / 6)
    assert interval_pdf(m, 0.0)[0] == irregular_limit(m)
    with pytest.raises(ValueError):
        irregular_limit(get_model("LH1"))
    d = interval_density(m, 1.0, dt=0.1, opts=FASTER)
    assert d.f[0] == irregular_limit(m)
    assert d.f[1] == pytest.approx(0.5 * (d.f[0] + d.f[2]))


@pytest.fixture(scope="module")
def small_joint(wh2):
    return joint_interval_pdf(wh2, dt=math.pi / 8, n=28, opts=FASTER)


def test_joint_symmetry_and_normalization(small_joint):
    j = small_joint
    assert np.array_equal(j.f, j.f.T)
    assert j.normalization == pytest.approx(1.0, abs=0.03)
    assert -1 <= j.correlation <= 1 and j.kl >= 0
    assert j.means[0] == pytest.approx(math.pi, rel=0.02)


def test_joint_marginal_matches_interval_density(wh2, small_joint):
    j = small_joint
    d = interval_density(wh2, float(j.t1[-1]), dt=math.pi / 8, opts=FASTER)
    assert np.all(np.abs(j.m1.f - d.f) <= 3 * (j.m1.err + d.err) + 1e-12)


def test_joint_without_symmetry_shortcut(wh2):
    a = joint_interval_pdf(wh2, dt=math.pi / 4, n=8, opts=FASTER, exploit_symmetry=False)
    assert np.all(np.abs(a.f - a.f.T) <= a.err + a.err.T + 1e-12)


def test_joint_dimension_guard(wh2):
    with pytest.raises(ValueError):
        joint_interval_pdf(wh2, dt=0.01, n=300)


def test_triple_crossing_intensity_factorizes_at_large_lags():
    m = get_model("BMS2", normalized=True)
    v, e = triple_crossing_intensity(m, 0.0, 40.0, 80.0)
    assert v == pytest.approx(crossing_rate(m) ** 3, abs=e + 1e-12)
    with pytest.raises(ValueError):
        triple_crossing_intensity(m, 1.0, 0.5, 2.0)


def test_tri_interval_marginal_symmetry(wh2):
    f3 = tri_interval_pdf(wh2, dt=math.pi / 4, n=6, opts=MvnOptions(speed=8))
    assert f3.f.shape == (7, 7, 7)
    assert np.array_equal(f3.f, np.transpose(f3.f, (2, 1, 0)))
    assert np.all(np.isfinite(f3.marginal_last_two()))


def test_tri_interval_marginal_matches_joint():
    m = get_model("WH3", normalized=True)
    dt = math.pi / 8
    f3 = tri_interval_pdf(m, dt=dt, n=20, opts=FASTER)
    j = joint_interval_pdf(m, dt=dt, n=20, opts=FASTER)
    marg = f3.marginal_last_two()
    err = np.trapezoid(f3.err, f3.t, axis=0) + j.err
    sel = j.f * dt * dt >= 1e-4
    assert np.all(np.abs(marg - j.f)[sel] <= 3 * err[sel])


def _narrow(tau, width=0.02):
    t = np.linspace(0, 2 * tau, 2001)
    f = np.exp(-0.5 * ((t - tau) / width) ** 2) / (width * math.sqrt(2 * math.pi))
    return Density1D(t, f, np.zeros_like(t))


def test_delays_of_near_deterministic_intervals():
    tau = 2.0
    f_a, f_cov, f_ab = delay_relations(_narrow(tau))
    inside = f_a.t < tau - 0.1
    assert np.allclose(f_a.f[inside], 1 / tau, atol=1e-6)
    assert np.all(f_a.f[f_a.t > tau + 0.1] < 1e-6)
    assert f_a.normalization == pytest.approx(1.0, abs=1e-6)
    assert f_cov.mean == pytest.approx(tau, rel=1e-3)
    assert f_ab.shape == (f_a.t.size,) * 2


def test_inspection_paradox_ordering(wh2_density):
    f_a, f_cov, _ = delay_relations(wh2_density)
    Fa, Ft, Fc = f_a.cdf(), wh2_density.cdf(), f_cov.cdf()
    assert np.all(Fa >= Ft - 1e-3)
    assert np.all(Ft >= Fc - 1e-3)


def test_delay_relations_rejects_unnormalized():
    d = _narrow(1.0)
    with pytest.raises(ValueError):
        delay_relations(Density1D(d.t, 2 * d.f, d.err))


def test_delay_relations_asymmetric_weights():
    fp, fm = _narrow(1.0), _narrow(1.0)
    fm = Density1D(fp.t * 3, fp.f / 3, fp.err)
    f_a, f_c, wp = delay_relations_asymmetric(fp, fm)
    assert wp == pytest.approx(0.25, rel=1e-3)


def _synthetic_curve(theta, T):
    Q = np.exp(-theta * T)
    return PersistenceCurve(T, Q, np.zeros_like(T), Q[None, :], 0.1)


@settings(max_examples=20, deadline=None)
@given(theta=st.floats(0.05, 1.0))
def test_exponent_of_pure_exponential(theta):
    c = _synthetic_curve(theta, np.linspace(0.5, 20, 40))
    for fit in ("global", "local-quadratic"):
        est, info = persistence_exponent(c, fit=fit)
        assert abs(est - theta) < 1e-12
    assert info["window"] == (0.0, 20.0)


def test_exponent_input_checks():
    c = _synthetic_curve(0.2, np.linspace(1, 5, 6))
    with pytest.raises(ValueError):
        persistence_exponent(c)
    with pytest.raises(ValueError):
        persistence_exponent(_synthetic_curve(0.2, np.linspace(1, 20, 20)), fit="cubic")


def test_unreliable_flag():
    c = _synthetic_curve(2.0, np.linspace(1, 20, 20))
    assert c.unreliable.sum() == np.sum(c.Q < 1e-12) > 0
    theta, info = persistence_exponent(c)
    assert info["window"][1] == pytest.approx(float(c.T[~c.unreliable].max()))


@pytest.fixture(scope="module")
def bms2_curve():
    return persistence_QT(get_model("BMS2"), np.arange(1.0, 12.5, 1.0), n_runs=10)


def test_persistence_curve_shape(bms2_curve):
    c = bms2_curve
    assert np.all(np.diff(c.Q) < 0)
    assert c.n_runs == 10 and np.all(c.Q_err > 0)
    assert np.all(np.isfinite(c.local_theta))
    assert c.fit_window == (0.0, 12.0) and 0.15 < c.theta_hat < 0.22
    short = persistence_QT(get_model("BMS2"), [0.1], n_runs=4)
    assert short.Q[0] == pytest.approx(1.0, abs=0.02)
    assert math.isnan(short.theta_hat)


def test_persistence_matches_pure_indicator_probability(bms2_curve):
    from levelcross.covmodel import eval_cov

    m = get_model("BMS2")
    for k in (0, 5):
        T = bms2_curve.T[k]
        t = 0.1 * np.arange(int(round(T / 0.1)) + 1)
        S = eval_cov(m, t[:, None] - t[None, :])
        r = mvn_probability(MvnProblem(S, 0, 0, np.inf), MvnOptions(speed=3))
        assert abs(2 * r.value - bms2_curve.Q[k]) <= 2 * r.error + bms2_curve.Q_err[k]


def test_persistence_at_nonzero_level():
    m = get_model("BMS2")
    c = persistence_QT(m, [1.0, 2.0], u=0.5, n_runs=4)
    c0 = persistence_QT(m, [1.0, 2.0], u=0.0, n_runs=4)
    # moving the level away from zero makes staying on one side more likely
    assert np.all(c.Q > c0.Q)


def test_persistence_grid_checks():
    with pytest.raises(ValueError):
        persistence_QT(get_model("BMS2"), [0.0, 1.0])
    with pytest.raises(ValueError):
        persistence_QT(get_model("BMS2"), [50.0], max_dim=400)


def test_persistence_rate_at_thirty():
    c = persistence_QT(get_model("BMS2"), [30.0], n_runs=50)
    assert -math.log(c.Q[0]) / 30 == pytest.approx(0.1875, abs=0.003)
