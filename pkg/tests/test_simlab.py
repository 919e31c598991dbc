import math

import numpy as np
import pytest

from levelcross.covmodel import get_model
from levelcross.crossings import persistence_QT
from levelcross.deps import kl_distance
from levelcross.simlab import (
    IntervalSequence,
    bin_average,
    empirical_delays,
    empirical_density,
    empirical_joint,
    empirical_persistence,
    extract_intervals,
    read_intervals,
    simulate_paths,
    write_intervals,
)

BMS2 = get_model("BMS2")


@pytest.fixture(scope="module")
def bms2_paths():
    return simulate_paths(BMS2, 1 << 16, dt=0.1, n_paths=16, seed=4)


def _lag_cov(x, k):
    # the mean is known to be zero
    return np.mean(x[:, : x.shape[1] - k] * x[:, k:], axis=1)


def test_sample_variance(bms2_paths):
    per_path = _lag_cov(bms2_paths.x, 0)
    se = per_path.std(ddof=1) / math.sqrt(per_path.size)
    assert abs(per_path.mean() - 1.0) <= 3 * se


def test_sample_covariance_at_lag_two(bms2_paths):
    per_path = _lag_cov(bms2_paths.x, 20)
    se = per_path.std(ddof=1) / math.sqrt(per_path.size)
    assert abs(per_path.mean() - 1 / math.cosh(1.0)) <= 3 * se
    assert float(BMS2(2.0)) == pytest.approx(1 / math.cosh(1.0), rel=1e-12)


def test_simulation_is_deterministic():
    a = simulate_paths(BMS2, 1000, 0.1, n_paths=3, seed=9)
    b = simulate_paths(BMS2, 1000, 0.1, n_paths=3, seed=9)
    assert np.array_equal(a.x, b.x)
    # path i does not depend on how many paths were requested
    assert np.array_equal(simulate_paths(BMS2, 1000, 0.1, n_paths=1, seed=9).x[0], a.x[0])
    assert not np.array_equal(simulate_paths(BMS2, 1000, 0.1, seed=10).x[0], a.x[0])
    assert a.meta["clip_tol"] == 1e-9 and a.meta["embedding_size"] >= 2 * 999


def test_embedding_failure_suggests_spectral_method():
    with pytest.raises(ValueError, match="spectral"):
        simulate_paths(get_model("WN", normalized=True), 1 << 12, 0.05, max_size=1 << 16)
    with pytest.raises(ValueError):
        simulate_paths(BMS2, 1)


def test_sine_intervals_are_half_periods():
    dt, period = 0.01, 2 * math.pi
    t = dt * np.arange(20_000) + 0.123
    seq = extract_intervals(np.sin(t), dt)
    assert np.allclose(seq.length, period / 2, atol=1e-4)
    assert np.all(seq.side[1:] == -seq.side[:-1])
    seq = extract_intervals(np.sin(t), dt, u=0.5)
    above, below = seq.length[seq.side == 1], seq.length[seq.side == -1]
    assert np.allclose(above, 2 * math.acos(0.5), atol=1e-4)
    assert np.allclose(below, period - 2 * math.acos(0.5), atol=1e-4)


def test_extraction_edge_cases():
    seq = extract_intervals(np.ones(100), 0.1)
    assert seq.no_crossings and len(seq) == 0
    with pytest.raises(ValueError):
        extract_intervals(np.array([1.0, np.nan, -1.0]), 0.1)


@pytest.fixture(scope="module")
def wh2_intervals():
    m = get_model("WH2", normalized=True)
    return IntervalSequence.concat(
        extract_intervals(simulate_paths(m, 1 << 19, 0.05, seed=21 + 7919 * i).x[0], 0.05) for i in range(2))


def test_simulated_intervals_alternate_and_average_pi(wh2_intervals):
    seq = wh2_intervals
    assert np.all(seq.length > 0)
    starts = np.nonzero(np.diff(seq.start) > seq.length[:-1] + 0.5)[0]
    side = np.split(seq.side, starts + 1)
    assert all(np.all(s[1:] == -s[:-1]) for s in side)
    for n in (10_000, len(seq)):
        x = seq.length[:n]
        # successive intervals are correlated, so use batch means for the error
        b = x[: n // 100 * 100].reshape(100, -1).mean(axis=1)
        assert abs(x.mean() - math.pi) <= 3 * b.std(ddof=1) / 10


def test_pairs_never_straddle_paths():
    a = IntervalSequence(np.array([0.0, 1.0]), np.array([1.0, 2.0]), np.array([-1, 1]))
    b = IntervalSequence(np.array([0.0, 3.0]), np.array([3.0, 4.0]), np.array([1, -1]))
    seq = IntervalSequence.concat([a, b])
    t1, t2 = seq.pairs("below")
    assert list(zip(t1, t2)) == [(1.0, 2.0)]
    t1, t2 = seq.pairs("above")
    assert list(zip(t1, t2)) == [(3.0, 4.0)]


def test_histogram_of_independent_pairs():
    rng = np.random.default_rng(0)
    n = 1_000_000
    lengths = rng.gamma(4.0, 0.8, 2 * n)
    start = np.concatenate([[0.0], np.cumsum(lengths)[:-1]])
    side = np.where(np.arange(2 * n) % 2 == 0, -1, 1)
    seq = IntervalSequence(start, lengths, side)
    grid = np.linspace(0, 14, 57)
    j = empirical_joint(seq, grid)
    assert j.meta["pairs"] == n
    assert kl_distance(j) < 0.005


def test_histogram_mass_and_small_sample_warning():
    rng = np.random.default_rng(1)
    lengths = rng.uniform(0.5, 3.5, 2000)
    seq = IntervalSequence(np.concatenate([[0.0], np.cumsum(lengths)[:-1]]), lengths,
                           np.where(np.arange(2000) % 2 == 0, -1, 1))
    grid = np.linspace(0, 4, 41)
    with pytest.warns(UserWarning, match="pairs"):
        j = empirical_joint(seq, grid)
    assert j.normalization == pytest.approx(1.0, abs=1e-12)
    d = empirical_density(lengths, grid)
    assert d.normalization == pytest.approx(1.0, abs=1e-12)


def test_persistence_at_short_times(bms2_paths):
    c = empirical_persistence(bms2_paths, [0.1, 0.2])
    assert c.Q[0] == pytest.approx(1.0, abs=0.02)
    with pytest.raises(ValueError):
        empirical_persistence(bms2_paths.x, [1.0])


def test_persistence_matches_engine(bms2_paths):
    T = np.array([1.0, 2.0, 4.0])
    emp = empirical_persistence(bms2_paths, T)
    eng = persistence_QT(BMS2, T, n_runs=8)
    assert np.all(np.abs(emp.Q - eng.Q) <= emp.Q_err + eng.Q_err)


def test_delays_cover_intervals(wh2_intervals):
    A, B = empirical_delays(wh2_intervals, 20_000, seed=2)
    assert np.all(A >= 0) and np.all(B >= 0)
    # the covering interval is length-biased: its mean is E[T^2] / E[T]
    L = wh2_intervals.length
    assert np.mean(A + B) == pytest.approx(np.mean(L * L) / np.mean(L), rel=0.02)


def test_lh1_delay_cdf_ordering():
    m = get_model("LH1", normalized=True)
    seq = IntervalSequence.concat(
        extract_intervals(simulate_paths(m, 1 << 19, 0.05, seed=5 + 7919 * i).x[0], 0.05) for i in range(2))
    A, B = empirical_delays(seq, 100_000, seed=1)
    g = np.linspace(0, 30, 601)
    F = lambda x: np.searchsorted(np.sort(x), g, side="right") / x.size
    Fa, Ft, Fc = F(A), F(seq.length), F(A + B)
    # empirical cdfs only order up to sampling noise, which matters in the far tail
    band = lambda Fx, nx, Fy, ny: 3 * np.sqrt(Fx * (1 - Fx) / nx + Fy * (1 - Fy) / ny)
    assert np.all(Fa - Ft >= -band(Fa, A.size, Ft, len(seq)))
    assert np.all(Ft - Fc >= -band(Ft, len(seq), Fc, A.size))
    assert np.min((Fa - Ft)[(g > 0.5) & (g < 5)]) > 0.01


def test_interval_file_roundtrip(tmp_path, wh2_intervals):
    path = tmp_path / "iv.bin"
    write_intervals(path, wh2_intervals)
    write_intervals(path, wh2_intervals, append=True)
    back = read_intervals(path)
    n = len(wh2_intervals)
    assert len(back) == 2 * n
    assert np.array_equal(back.length[:n], wh2_intervals.length)
    assert np.array_equal(back.side[n:], wh2_intervals.side)
    assert path.stat().st_size == 2 * n * 24
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(ValueError):
        read_intervals(path)


def test_bin_average_of_polynomials():
    from levelcross.crossings import JointDensity2D

    t = np.linspace(0, 4, 17)
    # Simpson is exact on cubics, so interior bins reproduce the exact bin average
    F = np.add.outer(t ** 3, t ** 2)
    z = np.zeros_like(F)
    avg = bin_average(JointDensity2D(t, t.copy(), F, z, z))
    h = t[1] - t[0]
    tc = t[::2]
    a = ((tc + h) ** 4 - (tc - h) ** 4) / (8 * h)
    b = ((tc + h) ** 3 - (tc - h) ** 3) / (6 * h)
    assert np.allclose(avg.f[1:-1, 1:-1], np.add.outer(a, b)[1:-1, 1:-1], rtol=1e-12)
    assert np.allclose(avg.t1, tc)
    with pytest.raises(ValueError):
        bin_average(JointDensity2D(t[:-1], t[:-1], F[:-1, :-1], z[:-1, :-1], z[:-1, :-1]))
