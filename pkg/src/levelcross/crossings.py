"""Crossing-interval densities and persistence from the generalized Rice formula.

All quantities are expectations of products of derivative weights at
crossing epochs times indicators that the path stays on the prescribed side
of the level on a discrete grid between the epochs, conditioned on the
process being at the level at the epochs.  They are evaluated with
:mod:`levelcross.mvnexp`.

Orientation conventions (level ``u``):

* a single interval ``'above'`` starts with an upcrossing and ends with a
  downcrossing; ``'below'`` is the reverse;
* the joint density of two successive intervals has T1 below the level and
  T2 above it (downcrossing at -t1, upcrossing at 0, downcrossing at t2);
* the triple density prepends an interval T0 above the level.
"""
from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from .covmodel import CovarianceModel
from .mvnexp import IntegralResult, MvnOptions, MvnProblem, mvn_expectation

__all__ = [
    "IRREGULAR_K",
    "Density1D",
    "JointDensity2D",
    "Density3D",
    "PersistenceCurve",
    "crossing_rate",
    "first_passage_density",
    "interval_tail",
    "interval_pdf",
    "interval_density",
    "irregular_limit",
    "joint_interval_pdf",
    "tri_interval_pdf",
    "triple_crossing_intensity",
    "delay_relations",
    "delay_relations_asymmetric",
    "persistence_QT",
    "persistence_exponent",
    "default_dt",
]

IRREGULAR_K = 1.15597
UNRELIABLE_Q = 1e-12

_SIDE = {"above": (+1, "+", "-"), "below": (-1, "-", "+")}


def crossing_rate(model: CovarianceModel, u: float = 0.0) -> float:
    """Mean number of upcrossings of level u per unit time."""
    m = model.moments()
    return math.sqrt(m.lam2 / m.lam0) / (2 * math.pi) * math.exp(-u * u / (2 * m.lam0))


def default_dt(model: CovarianceModel) -> float:
    """Grid step giving 16 points per mean zero-crossing interval."""
    return model.mean_interval / 16.0


# ---------------------------------------------------------------------------
# data containers


@dataclass
class Density1D:
    """Density on a uniform grid with pointwise error estimates."""

    t: np.ndarray
    f: np.ndarray
    err: np.ndarray
    label: str = ""

    @property
    def normalization(self) -> float:
        return float(np.trapezoid(self.f, self.t))

    @property
    def mean(self) -> float:
        return float(np.trapezoid(self.t * self.f, self.t) / self.normalization)

    def cdf(self) -> np.ndarray:
        c = np.concatenate([[0.0], np.cumsum(0.5 * (self.f[1:] + self.f[:-1]) * np.diff(self.t))])
        return c


@dataclass
class JointDensity2D:
    """Joint density of two successive intervals on a uniform grid.

    ``f[i, j]`` is the density at ``(t1[i], t2[j])``.
    """

    t1: np.ndarray
    t2: np.ndarray
    f: np.ndarray
    err: np.ndarray
    terr: np.ndarray
    level: float = 0.0
    runtime: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def normalization(self) -> float:
        return float(np.trapezoid(np.trapezoid(self.f, self.t2, axis=1), self.t1))

    @property
    def m1(self) -> Density1D:
        return Density1D(self.t1, np.trapezoid(self.f, self.t2, axis=1),
                         np.trapezoid(self.err, self.t2, axis=1), "T1")

    @property
    def m2(self) -> Density1D:
        return Density1D(self.t2, np.trapezoid(self.f, self.t1, axis=0),
                         np.trapezoid(self.err, self.t1, axis=0), "T2")

    @property
    def means(self) -> tuple[float, float]:
        return self.m1.mean, self.m2.mean

    @property
    def correlation(self) -> float:
        from .deps import interval_correlation

        return interval_correlation(self)

    @property
    def kl(self) -> float:
        from .deps import kl_distance

        return kl_distance(self)


@dataclass
class Density3D:
    """Joint density of three successive intervals, ``f[i, j, k]`` at (t[i], t[j], t[k])."""

    t: np.ndarray
    f: np.ndarray
    err: np.ndarray
    level: float = 0.0
    runtime: float = 0.0

    def marginal_last_two(self) -> np.ndarray:
        return np.trapezoid(self.f, self.t, axis=0)


@dataclass
class PersistenceCurve:
    """Persistence probabilities Q_T = P(no crossing of u on [0, T]) on a grid.

    ``runs[r, k]`` holds run r's estimate at ``T[k]``; ``Q`` is the run mean.
    """

    T: np.ndarray
    Q: np.ndarray
    Q_err: np.ndarray
    runs: np.ndarray
    dt: float
    level: float = 0.0
    runtime: float = 0.0
    theta_hat: float = math.nan
    fit_window: tuple | None = None

    @property
    def n_runs(self) -> int:
        return int(self.runs.shape[0])

    @property
    def unreliable(self) -> np.ndarray:
        """Mask of grid points whose Q is too small to trust."""
        return ~(self.Q >= UNRELIABLE_Q)

    @property
    def local_theta(self) -> np.ndarray:
        """Local slope of -log Q by central differences."""
        with np.errstate(divide="ignore", invalid="ignore"):
            return -np.gradient(np.log(self.Q), self.T)


# ---------------------------------------------------------------------------
# covariance on an integer grid


class _LagCov:
    """r, r', r'' tabulated at lags k*h, used to assemble covariances of grid points."""

    def __init__(self, model: CovarianceModel, h: float, kmax: int):
        self.model, self.h, self.K = model, h, kmax
        lags = h * np.arange(-kmax, kmax + 1)
        self.r0 = model.deriv(lags, 0)
        self.r1 = model.deriv(lags, 1)
        self.r2 = model.deriv(lags, 2)

    def ensure(self, kmax: int) -> None:
        if kmax > self.K:
            self.__init__(self.model, self.h, max(kmax, 2 * self.K))

    def cov(self, vi: np.ndarray, di: np.ndarray) -> np.ndarray:
        """Covariance of (X(vi*h), X'(di*h))."""
        K = self.K
        vv = self.r0[vi[None, :] - vi[:, None] + K]
        vd = self.r1[di[None, :] - vi[:, None] + K]
        dd = -self.r2[di[None, :] - di[:, None] + K]
        return np.block([[vv, vd], [vd.T, dd]])


def _crossing_problem(lc: _LagCov, epochs: Sequence[int], signs: Sequence[str],
                      segments: Sequence[tuple[int, int, int]], u: float, ridge: float) -> MvnProblem:
    """Problem for E[prod w(X'(e)) 1{segments} | X(e) = u] f(u,...).

    ``segments`` are (start, end, side) with side +1 for X > u strictly inside
    (start, end) and -1 for X < u.
    """
    interior, lo, hi = [], [], []
    for a, b, side in segments:
        pts = np.arange(a + 1, b)
        interior.append(pts)
        lo.append(np.full(pts.size, u if side > 0 else -np.inf))
        hi.append(np.full(pts.size, np.inf if side > 0 else u))
    vi = np.concatenate(interior + [np.asarray(epochs)]).astype(int)
    di = np.asarray(epochs, dtype=int)
    nt, ne = vi.size - di.size, di.size
    lc.ensure(int(np.max(vi) - np.min(vi)) + 1)
    cov = lc.cov(vi, di)
    # order as (indicators, derivatives, conditioning values)
    order = np.concatenate([np.arange(nt), nt + ne + np.arange(ne), nt + np.arange(ne)])
    cov = cov[np.ix_(order, order)]
    if ridge:
        cov = cov + ridge * np.eye(cov.shape[0])
    n = cov.shape[0]
    lower = np.concatenate(lo + [np.full(2 * ne, -np.inf)])
    upper = np.concatenate(hi + [np.full(2 * ne, np.inf)])
    return MvnProblem(
        cov=cov,
        mean=np.zeros(n),
        lower=lower,
        upper=upper,
        weights=tuple((nt + i, s) for i, s in enumerate(signs)),
        cond_index=tuple(nt + ne + i for i in range(ne)),
        cond_value=(u,) * ne,
    )


def _opts_for(opts: MvnOptions | None, seed_offset: int) -> MvnOptions:
    opts = opts or MvnOptions()
    return MvnOptions(speed=opts.speed, n_points=opts.n_points, n_shifts=opts.n_shifts,
                      sd_tol=opts.sd_tol, seed=opts.seed + seed_offset, max_dim=opts.max_dim,
                      ordering=opts.ordering, chunk=opts.chunk)


def _steps(t: float, h: float) -> int:
    k = int(round(t / h))
    if abs(k * h - t) > 1e-8 * max(1.0, t):
        raise ValueError(f"t={t} is not a multiple of the grid step {h}")
    return k


# ---------------------------------------------------------------------------
# single intervals


def _single(model, t, u, side, dt, opts, ridge, both_ends):
    dt = dt or default_dt(model)
    k = _steps(t, dt)
    sgn, s_start, s_end = _SIDE[side]
    lc = _LagCov(model, dt, k + 1)
    if both_ends:
        prob = _crossing_problem(lc, [0, k], [s_start, s_end], [(0, k, sgn)], u, ridge)
    else:
        prob = _crossing_problem(lc, [0], [s_start], [(0, k + 1, sgn)], u, ridge)
        # indicators on the open interval (0, t]: the end point is included
    return mvn_expectation(prob, _opts_for(opts, k))


def first_passage_density(model: CovarianceModel, a: float, u: float = 0.0, dt: float | None = None,
                          opts: MvnOptions | None = None, ridge: float = 1e-7) -> tuple[float, float]:
    """Density of the forward delay A (time from a fixed origin to the next crossing).

    Sum over both orientations of E[X'(0)^+- 1{X stays on its side on (0, a]} | X(0)=u] f(u).
    """
    if a == 0:
        return 2 * crossing_rate(model, u), 0.0
    sides = ("above",) if u == 0 else ("above", "below")
    val = err = 0.0
    for side in sides:
        r = _single(model, a, u, side, dt, opts, ridge, both_ends=False)
        val += r.value
        err += r.error
    if u == 0:
        val, err = 2 * val, 2 * err
    return val, err


def interval_tail(model: CovarianceModel, t0: float, u: float = 0.0, side: str = "above",
                  dt: float | None = None, opts: MvnOptions | None = None,
                  ridge: float = 1e-7) -> tuple[float, float]:
    """Stationary tail P(T > t0) of an interval on the given side of the level."""
    if t0 == 0:
        return 1.0, 0.0
    r = _single(model, t0, u, side, dt, opts, ridge, both_ends=False)
    nu = crossing_rate(model, u)
    return r.value / nu, r.error / nu


def interval_pdf(model: CovarianceModel, t: float, u: float = 0.0, side: str = "above",
                 dt: float | None = None, opts: MvnOptions | None = None,
                 ridge: float = 1e-7) -> tuple[float, float]:
    """Stationary density of an interval on the given side of the level at length t."""
    dt = dt or default_dt(model)
    if t == 0:
        return (irregular_limit(model) if not model.regular else 0.0), 0.0
    r = _single(model, t, u, side, dt, opts, ridge, both_ends=True)
    nu = crossing_rate(model, u)
    return r.value / nu, r.error / nu


def interval_density(model: CovarianceModel, t_max: float, dt: float | None = None, u: float = 0.0,
                     side: str = "above", opts: MvnOptions | None = None, ridge: float = 1e-7) -> Density1D:
    """Interval density on the grid 0, dt, ..., t_max.

    For irregular models the two points nearest the origin are replaced by
    the limit K*alpha at 0 and linear interpolation at dt.
    """
    dt = dt or default_dt(model)
    n = int(round(t_max / dt))
    t = dt * np.arange(n + 1)
    f, e = np.zeros(n + 1), np.zeros(n + 1)
    for i in range(1, n + 1):
        f[i], e[i] = interval_pdf(model, t[i], u, side, dt, opts, ridge)
    if not model.regular:
        f[0] = irregular_limit(model)
        if n >= 2:
            f[1] = 0.5 * (f[0] + f[2])
    return Density1D(t, f, e, f"T_{side}")


def irregular_limit(model: CovarianceModel) -> float:
    """Limit of the interval density at 0 for irregular models, K * C / (6 lambda2)."""
    m = model.moments()
    if m.regular or m.C == 0:
        raise ValueError("irregular_limit is defined only for irregular models")
    return IRREGULAR_K * m.C / (6 * m.lam2)


# ---------------------------------------------------------------------------
# two and three successive intervals


def _run_cells(cells, fn, workers: int):
    """Evaluate ``fn`` on every cell; results are keyed by cell so order is deterministic."""
    if workers and workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as ex:
            return dict(zip(cells, ex.map(fn, cells)))
    return {c: fn(c) for c in cells}


def joint_interval_pdf(model: CovarianceModel, dt: float | None = None, n: int = 60, u: float = 0.0,
                       opts: MvnOptions | None = None, n_sub: int = 1, ridge: float = 1e-7,
                       exploit_symmetry: bool = True, k_min: int = 1, workers: int = 1,
                       progress=None) -> JointDensity2D:
    """Joint density of a below-level interval T1 followed by an above-level interval T2.

    Evaluated on the grid t = k*dt, k = 0..n, with ``n_sub`` indicator points
    per grid step.  Cells with k < ``k_min`` on either axis are left at zero
    (apart from the irregular axis extension).  At u = 0 the density is
    symmetrized; with ``exploit_symmetry`` only the upper triangle is
    integrated and mirrored.
    """
    dt = dt or default_dt(model)
    opts = opts or MvnOptions()
    h = dt / n_sub
    t = dt * np.arange(n + 1)
    f = np.zeros((n + 1, n + 1))
    err = np.zeros_like(f)
    terr = np.zeros_like(f)
    if 2 * n * n_sub + 4 > opts.max_dim:
        raise ValueError("grid too large for the configured max_dim")
    lc = _LagCov(model, h, 2 * n * n_sub + 2)
    nu = crossing_rate(model, u)
    sym = u == 0 and exploit_symmetry
    t0 = time.perf_counter()
    k0 = max(1, k_min)
    cells = [(i, j) for i in range(k0, n + 1) for j in range(i if sym else k0, n + 1)]

    def cell(c):
        i, j = c
        a, b = i * n_sub, j * n_sub
        prob = _crossing_problem(lc, [-a, 0, b], ["-", "+", "-"], [(-a, 0, -1), (0, b, +1)], u, ridge)
        r = mvn_expectation(prob, _opts_for(opts, 7919 * i + j))
        if progress:
            progress(i, j)
        return r.value / nu, r.sampling_error / nu, r.truncation_error / nu

    for (i, j), (v, e, te) in _run_cells(cells, cell, workers).items():
        f[i, j], err[i, j], terr[i, j] = v, e, te
    if sym:
        iu = np.triu_indices(n + 1, 1)
        for arr in (f, err, terr):
            arr[iu[1], iu[0]] = arr[iu]
    elif u == 0:
        f = 0.5 * (f + f.T)
        err = 0.5 * (err + err.T)
        terr = 0.5 * (terr + terr.T)
    if not model.regular and k0 == 1:
        _extend_axes(f, t, irregular_limit(model))
    return JointDensity2D(t, t.copy(), f, err, terr, level=u, runtime=time.perf_counter() - t0,
                          meta={"model": model.name, "dt": dt, "n": n, "n_sub": n_sub,
                                "speed": opts.speed, "seed": opts.seed})


def _extend_axes(f: np.ndarray, t: np.ndarray, limit: float) -> None:
    """Fill the t1 = 0 row and t2 = 0 column so that the marginals start at ``limit``."""
    row = f[1, 1:]
    m_row = np.trapezoid(f[1, :], t)
    col = f[1:, 1]
    m_col = np.trapezoid(f[:, 1], t)
    if m_row > 0:
        f[0, 1:] = limit * row / m_row
    if m_col > 0:
        f[1:, 0] = limit * col / m_col
    f[0, 0] = 0.5 * (f[0, 1] + f[1, 0])


def tri_interval_pdf(model: CovarianceModel, dt: float | None = None, n: int = 20, u: float = 0.0,
                     opts: MvnOptions | None = None, ridge: float = 1e-7, exploit_symmetry: bool = True,
                     k_min: int = 1, workers: int = 1, progress=None) -> Density3D:
    """Joint density of three successive intervals (above, below, above) on t = k*dt, k = 0..n.

    Cells with any index below ``k_min`` are left at zero.
    """
    dt = dt or default_dt(model)
    opts = opts or MvnOptions()
    if 3 * n + 8 > opts.max_dim:
        raise ValueError("grid too large for the configured max_dim")
    t = dt * np.arange(n + 1)
    f = np.zeros((n + 1,) * 3)
    err = np.zeros_like(f)
    lc = _LagCov(model, dt, 3 * n + 2)
    nu = crossing_rate(model, u)
    sym = u == 0 and exploit_symmetry
    k0 = max(1, k_min)
    t0 = time.perf_counter()
    cells = [(i, j, k) for i in range(k0, n + 1) for j in range(k0, n + 1)
             for k in range(i if sym else k0, n + 1)]

    def cell(c):
        i, j, k = c
        e = [-(i + j), -j, 0, k]
        prob = _crossing_problem(lc, e, ["+", "-", "+", "-"],
                                 [(e[0], e[1], +1), (e[1], e[2], -1), (e[2], e[3], +1)], u, ridge)
        r = mvn_expectation(prob, _opts_for(opts, (i * 1009 + j) * 1009 + k))
        if progress:
            progress(i, j, k)
        return r.value / nu, r.error / nu

    for (i, j, k), (v, e) in _run_cells(cells, cell, workers).items():
        f[i, j, k], err[i, j, k] = v, e
    if sym:
        for i in range(n + 1):
            for k in range(i):
                f[i, :, k] = f[k, :, i]
                err[i, :, k] = err[k, :, i]
    return Density3D(t, f, err, level=u, runtime=time.perf_counter() - t0)


def triple_crossing_intensity(model: CovarianceModel, s: float, t: float, v: float, u: float = 0.0,
                              opts: MvnOptions | None = None) -> tuple[float, float]:
    """Density of an upcrossing at s, a downcrossing at t and an upcrossing at v (s < t < v).

    No indicator constraints between the epochs.
    """
    if not s < t < v:
        raise ValueError("need s < t < v")
    from .covmodel import stacked_covariance

    times = np.array([s, t, v], dtype=float)
    full = stacked_covariance(model, times, times)
    order = [3, 4, 5, 0, 1, 2]
    cov = full[np.ix_(order, order)]
    prob = MvnProblem(cov, np.zeros(6), np.full(6, -np.inf), np.full(6, np.inf),
                      weights=((0, "+"), (1, "-"), (2, "+")), cond_index=(3, 4, 5), cond_value=(u, u, u))
    r = mvn_expectation(prob, opts)
    return r.value, r.error


# ---------------------------------------------------------------------------
# delays


def delay_relations(fT: Density1D):
    """Forward delay, covering interval and joint (A, B) densities from an interval density.

    Returns ``(f_A, f_{A+B}, f_{A,B})`` with f_{A,B}[i, j] at (t[i], t[j]).
    """
    t, f = fT.t, fT.f
    norm = fT.normalization
    if not np.all(np.diff(t) > 0):
        raise ValueError("grid must be increasing")
    if abs(norm - 1) > 0.05:
        raise ValueError(f"interval density not normalized (integral {norm:.4f})")
    # grid error in the mass would otherwise break F_A >= F_T near the end of the grid
    f = f / norm
    mu = float(np.trapezoid(t * f, t))
    if not mu > 0:
        raise ValueError("mean interval must be positive")
    tail = np.concatenate([[0.0], np.cumsum((0.5 * (f[1:] + f[:-1]) * np.diff(t))[::-1])])[::-1]
    f_a = Density1D(t, tail / mu, np.zeros_like(t), "A")
    f_cov = Density1D(t, t * f / mu, np.zeros_like(t), "A+B")
    n = t.size
    idx = np.add.outer(np.arange(n), np.arange(n))
    fpad = np.concatenate([f, np.zeros(n)])
    f_ab = fpad[idx] / mu
    return f_a, f_cov, f_ab


def delay_relations_asymmetric(f_plus: Density1D, f_minus: Density1D):
    """Forward delay and covering-interval densities for alternating intervals of two types.

    The origin falls in an interval of type + with probability mu+/(mu+ + mu-).
    """
    mp = float(np.trapezoid(f_plus.t * f_plus.f, f_plus.t)) / f_plus.normalization
    mm = float(np.trapezoid(f_minus.t * f_minus.f, f_minus.t)) / f_minus.normalization
    a_p, c_p, _ = delay_relations(f_plus)
    a_m, c_m, _ = delay_relations(f_minus)
    wp, wm = mp / (mp + mm), mm / (mp + mm)
    f_a = Density1D(f_plus.t, wp * a_p.f + wm * a_m.f, np.zeros_like(f_plus.t), "A")
    f_c = Density1D(f_plus.t, wp * c_p.f + wm * c_m.f, np.zeros_like(f_plus.t), "A+B")
    return f_a, f_c, wp


# ---------------------------------------------------------------------------
# persistence


def persistence_QT(model: CovarianceModel, T_grid: Sequence[float], u: float = 0.0, n_runs: int = 50,
                   seed: int = 0, dt: float = 0.1, shifts_per_run: int = 4, n_points: int = 509,
                   ridge: float = 0.0, sd_tol: float = 1e-6, max_dim: int = 400) -> PersistenceCurve:
    """Persistence probability Q_T = P(X > u on the grid of [0,T]) + P(X < u on it).

    Each run is an independent randomization of the lattice rule; the
    reported curve is the run mean with a 95% t-interval.  The model is used
    in its own time units.
    """
    T = np.asarray(T_grid, dtype=float)
    if np.any(T <= 0):
        raise ValueError("T_grid must be positive")
    kmax = int(round(T.max() / dt))
    lc = _LagCov(model, dt, kmax + 1)
    runs = np.zeros((n_runs, T.size))
    t0 = time.perf_counter()
    for k, Tk in enumerate(T):
        npts = _steps(Tk, dt) + 1
        if npts > max_dim:
            raise ValueError(f"T={Tk} needs {npts} grid points, above max_dim={max_dim}")
        idx = np.arange(npts)
        cov = lc.r0[idx[None, :] - idx[:, None] + lc.K] + ridge * np.eye(npts)
        opts = MvnOptions(n_points=n_points, n_shifts=n_runs * shifts_per_run, sd_tol=sd_tol,
                          seed=seed + 104729 * k, max_dim=max_dim)
        total = np.zeros(n_runs)
        for side in ((+1, -1) if u != 0 else (+1,)):
            lo = np.full(npts, u if side > 0 else -np.inf)
            hi = np.full(npts, np.inf if side > 0 else u)
            res = mvn_expectation(MvnProblem(cov, np.zeros(npts), lo, hi), opts)
            total += res.shift_values.reshape(n_runs, shifts_per_run).mean(axis=1)
        runs[:, k] = 2 * total if u == 0 else total
    Q = runs.mean(axis=0)
    if n_runs > 1:
        tq = stats.t.ppf(0.975, n_runs - 1)
        Q_err = tq * runs.std(axis=0, ddof=1) / math.sqrt(n_runs)
    else:
        Q_err = np.full_like(Q, np.nan)
    curve = PersistenceCurve(T, Q, Q_err, runs, dt, level=u, runtime=time.perf_counter() - t0)
    if np.any(curve.unreliable):
        warnings.warn(f"Q below {UNRELIABLE_Q:g} at {int(curve.unreliable.sum())} grid points")
    if np.sum(~curve.unreliable) >= _MIN_FIT_POINTS:
        curve.theta_hat, info = persistence_exponent(curve)
        curve.fit_window = info["window"]
    return curve


_MIN_FIT_POINTS = 10


def persistence_exponent(curve: PersistenceCurve, fit: str = "local-quadratic",
                         window: tuple[float, float] | None = None, at: float | None = None):
    """Exponent estimate from the decay of -log Q_T.

    ``fit='global'`` returns the least-squares slope over the window;
    ``fit='local-quadratic'`` fits a quadratic and returns its derivative at
    ``at`` (default: half the window's upper end).

    Returns
    -------
    theta : float
    info : dict with the window, the fitted coefficients and the local slopes
    """
    T, Q = curve.T, curve.Q
    lo, hi = window if window is not None else (0.0, float(T[~curve.unreliable].max(initial=0.0)))
    sel = (T >= lo) & (T <= hi)
    if np.any(Q[sel] <= 0):
        raise ValueError("nonpositive Q in the fit window")
    if sel.sum() < _MIN_FIT_POINTS:
        raise ValueError(f"fewer than {_MIN_FIT_POINTS} points in the fit window")
    y = -np.log(Q[sel])
    x = T[sel]
    if fit == "global":
        coef = np.polyfit(x, y, 1)
        theta = float(coef[0])
    elif fit == "local-quadratic":
        coef = np.polyfit(x, y, 2)
        x0 = at if at is not None else 0.5 * hi
        theta = float(2 * coef[0] * x0 + coef[1])
    else:
        raise ValueError(f"unknown fit {fit!r}")
    return theta, {"window": (lo, hi), "coef": coef, "local_theta": curve.local_theta}
