"""Conditioned, derivative-weighted multivariate normal expectations.

The engine evaluates

    E[ prod_{d in D} |X_d| 1{lower <= X <= upper} | X_c = x_c ] f_{X_c}(x_c)

for a Gaussian vector X, where the weight variables X_d carry their own
bounds (a sign constraint gives x^+ or x^-).  The integral is mapped to the
unit cube by separation of variables: a pivoted Cholesky factorisation with
greedy ordering (smallest conditional interval probability first), weight
variables leading.  Each weight variable contributes its closed-form
truncated first moment and is then drawn from the size-biased conditional
law; each indicator contributes a difference of normal cdfs and is drawn from
the truncated normal.  Variables whose conditional standard deviation falls
below a tolerance are resolved deterministically.  Randomly shifted rank-1
lattice rules give the estimate and its error.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import erfcx, ndtr, ndtri

from ._lattice import generating_vector, prime_at_least

__all__ = [
    "MvnProblem",
    "MvnOptions",
    "IntegralResult",
    "SovPlan",
    "condition",
    "sov_transform",
    "mvn_probability",
    "mvn_weighted",
    "mvn_expectation",
    "dump_problem_csv",
    "SPEED_PRESETS",
]

_SQ2PI = math.sqrt(2 * math.pi)
_LOG_SQ2PI = 0.5 * math.log(2 * math.pi)
_ZMAX = 40.0

# speed -> (lattice points per shift, number of shifts, relative s.d. truncation tolerance)
SPEED_PRESETS = {
    1: (8191, 16, 1e-8),
    2: (4093, 16, 1e-7),
    3: (2039, 12, 1e-6),
    4: (1021, 12, 1e-6),
    5: (509, 12, 1e-5),
    6: (251, 12, 1e-5),
    7: (127, 12, 1e-4),
    8: (61, 12, 1e-4),
    9: (31, 12, 1e-3),
}

_SIGNS = {"+": (0.0, math.inf), "-": (-math.inf, 0.0), "abs": (-math.inf, math.inf)}


@dataclass(frozen=True, eq=False)
class MvnProblem:
    """Gaussian integration problem.

    Parameters
    ----------
    cov, mean : covariance matrix and mean vector.
    lower, upper : bounds per variable (+-inf allowed). Bounds of conditioning
        variables are ignored.
    weights : pairs ``(index, sign)`` with sign ``'+'`` (weight x^+),
        ``'-'`` (x^-) or ``'abs'`` (|x|).
    cond_index, cond_value : conditioning variables and their values.
    factor : constant multiplying the expectation (e.g. a density factor).
    """

    cov: np.ndarray
    mean: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    weights: tuple = ()
    cond_index: tuple = ()
    cond_value: tuple = ()
    factor: float = 1.0

    def __post_init__(self):
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        n = cov.shape[0]
        mean = np.broadcast_to(np.asarray(self.mean, dtype=float), (n,)).copy()
        lo = np.broadcast_to(np.asarray(self.lower, dtype=float), (n,)).copy()
        hi = np.broadcast_to(np.asarray(self.upper, dtype=float), (n,)).copy()
        if cov.shape != (n, n):
            raise ValueError("covariance must be square")
        if not np.allclose(cov, cov.T, rtol=0, atol=1e-12 * max(1.0, float(np.abs(cov).max()))):
            raise ValueError("covariance must be symmetric")
        weights = tuple((int(i), str(s)) for i, s in self.weights)
        for i, s in weights:
            if s not in _SIGNS:
                raise ValueError(f"unknown weight sign {s!r}")
        cidx = tuple(int(i) for i in self.cond_index)
        cval = tuple(float(v) for v in np.atleast_1d(np.asarray(self.cond_value, dtype=float)))
        if len(cidx) != len(cval):
            raise ValueError("cond_index and cond_value differ in length")
        widx = [i for i, _ in weights]
        if len(set(widx)) != len(widx) or set(widx) & set(cidx):
            raise ValueError("weight and conditioning indices must be distinct")
        for i in list(widx) + list(cidx):
            if not 0 <= i < n:
                raise IndexError(f"index {i} out of range")
        free = np.ones(n, dtype=bool)
        free[list(cidx)] = False
        if np.any(lo[free] > hi[free]):
            raise ValueError("lower must not exceed upper")
        object.__setattr__(self, "cov", 0.5 * (cov + cov.T))
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "cond_index", cidx)
        object.__setattr__(self, "cond_value", cval)

    @property
    def dim(self) -> int:
        return self.cov.shape[0]

    @property
    def n_t(self) -> int:
        """Number of indicator variables."""
        return self.dim - len(self.weights) - len(self.cond_index)


@dataclass(frozen=True)
class MvnOptions:
    """Integration budget. Explicit values override the speed preset."""

    speed: int = 4
    n_points: int | None = None
    n_shifts: int | None = None
    sd_tol: float | None = None
    seed: int = 0
    max_dim: int = 400
    ordering: str = "greedy"
    chunk: int = 1 << 15

    def resolved(self) -> tuple[int, int, float]:
        if self.speed not in SPEED_PRESETS:
            raise ValueError("speed must be an integer 1..9")
        n, m, tol = SPEED_PRESETS[self.speed]
        if self.n_points is not None:
            n = prime_at_least(self.n_points)
        if self.n_shifts is not None:
            m = int(self.n_shifts)
        if m < 2:
            raise ValueError("at least two shifts are needed for an error estimate")
        return n, m, self.sd_tol if self.sd_tol is not None else tol


@dataclass(frozen=True)
class IntegralResult:
    """Estimate with 3-sigma sampling error and truncation error estimates."""

    value: float
    sampling_error: float
    truncation_error: float
    n_evals: int
    seed: int
    shift_values: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)

    @property
    def error(self) -> float:
        return self.sampling_error + self.truncation_error


# ---------------------------------------------------------------------------
# univariate helpers


def _interval(a, b):
    """Reflect so that lo <= 0 side is used: returns (lo, hi, flip)."""
    flip = a > 0
    return np.where(flip, -b, a), np.where(flip, -a, b), flip


def _pdiff(a, b):
    """Phi(b) - Phi(a) without cancellation in the upper tail."""
    lo, hi, _ = _interval(a, b)
    return ndtr(hi) - ndtr(lo)


def _trunc_draw(a, b, w):
    """Mass of N(0,1) on (a, b) and an inverse-cdf draw from it."""
    lo, hi, flip = _interval(a, b)
    plo = ndtr(lo)
    p = ndtr(hi) - plo
    z = ndtri(np.clip(plo + w * p, 1e-300, 1.0))
    z = np.where(flip, -z, z)
    return p, np.clip(z, np.maximum(a, -_ZMAX), np.minimum(b, _ZMAX))


def _trunc_mean(a: float, b: float) -> float:
    lo, hi, flip = _interval(np.float64(a), np.float64(b))
    p = float(ndtr(hi) - ndtr(lo))
    if p < 1e-300:
        return float(np.clip(0.0, a, b)) if np.isfinite(a) or np.isfinite(b) else 0.0
    m = float((np.exp(-0.5 * lo * lo) - np.exp(-0.5 * hi * hi)) / _SQ2PI / p)
    return -m if flip else m


def _one_minus_zmills(z):
    """1 - z R(z) with R the Mills ratio, for z >= 0."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    big = z > 20.0
    zs = z[~big]
    out[~big] = 1.0 - zs * math.sqrt(math.pi / 2) * erfcx(zs / math.sqrt(2.0))
    zb = z[big]
    iz2 = 1.0 / (zb * zb)
    out[big] = iz2 * (1 - 3 * iz2 * (1 - 5 * iz2 * (1 - 7 * iz2 * (1 - 9 * iz2))))
    return out


def _log_upper_moment(z, z0):
    """log of int_z^inf (t - z0) phi(t) dt for z >= z0."""
    z = np.asarray(z, dtype=float)
    z0 = np.broadcast_to(z0, z.shape)
    out = np.empty_like(z)
    pos = z >= 0
    zp, z0p = z[pos], z0[pos]
    mills = math.sqrt(math.pi / 2) * erfcx(zp / math.sqrt(2.0))
    inner = _one_minus_zmills(zp) + (zp - z0p) * mills
    with np.errstate(divide="ignore", invalid="ignore"):
        out[pos] = -0.5 * zp * zp - _LOG_SQ2PI + np.log(inner)
    zn, z0n = z[~pos], z0[~pos]
    with np.errstate(divide="ignore", invalid="ignore"):
        out[~pos] = np.log(np.exp(-0.5 * zn * zn) / _SQ2PI - z0n * ndtr(-zn))
    return out


def _upper_mass(z0, l, h):
    """log of the tail moment at l and the mass of (t - z0) phi on [l, h], l >= z0."""
    lu_l = _log_upper_moment(l, z0)
    hc = np.minimum(h, _ZMAX)
    lu_h = np.where(np.isfinite(h), _log_upper_moment(hc, z0), -np.inf)
    ratio = np.exp(lu_h - lu_l)
    with np.errstate(invalid="ignore"):
        mass = np.exp(lu_l) * (1.0 - ratio)
    return lu_l, np.where(np.isfinite(mass) & (h > l), mass, 0.0), ratio


def _upper_draw(z0, l, h, w, lu_l, ratio):
    """Solve int_l^z (t - z0) phi = w * mass on [l, h].

    Newton steps on the concave, decreasing log tail moment converge
    monotonically once an iterate lies right of the root, so the start is
    chosen there from a closed-form upper bound of the tail moment.
    """
    lo = np.asarray(l, dtype=float)
    hi = np.minimum(np.asarray(h, dtype=float), _ZMAX)
    with np.errstate(invalid="ignore", divide="ignore"):
        target = lu_l + np.log1p(-w * (1.0 - ratio))
        # U(z) <= phi(z) (1 + |z0| sqrt(pi/2)) for z >= 0
        arg = -2.0 * (target + _LOG_SQ2PI - np.log1p(np.abs(z0) * math.sqrt(math.pi / 2)))
        zb = np.sqrt(np.where(arg > 0, arg, np.nan))
    ok = np.isfinite(zb) & (zb >= np.maximum(lo, 0.0)) & (zb < hi)
    z = np.where(ok, zb, hi)
    # a cheap unweighted guess, used when it already lies right of the root
    _, q = _trunc_draw(lo, hi, w)
    fq = _log_upper_moment(np.maximum(q, lo), z0) - target
    z = np.where((fq <= 0) & (q < z) & (q > lo), q, z)
    z0 = np.broadcast_to(z0, z.shape)
    active = np.isfinite(target) & (hi > lo)
    for _ in range(60):
        if not active.any():
            break
        za, z0a = z[active], z0[active]
        lu = _log_upper_moment(za, z0a)
        # d/dz log U = -(z - z0) phi(z) / U(z)
        g = -(za - z0a) * np.exp(-0.5 * za * za - _LOG_SQ2PI - lu)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(g < 0, (lu - target[active]) / g, 0.0)
        znew = np.clip(za - step, lo[active], hi[active])
        done = (np.abs(znew - za) <= 1e-11 * (1.0 + np.abs(za))) | ~np.isfinite(znew)
        z[active] = np.where(np.isfinite(znew), znew, za)
        idx = np.nonzero(active)[0]
        active[idx[done]] = False
    return np.where(hi > lo, z, lo)


def _weighted_draw(m, s, a, b, w):
    """Weight factor E[|X| 1{a<=X<=b}] for X ~ N(m, s^2) and a draw from the size-biased law.

    Returns the factor and the standardized draw z = (X - m)/s.
    """
    z0 = -m / s
    al = np.maximum((a - m) / s, -_ZMAX)
    be = np.minimum((b - m) / s, _ZMAX)
    # upper piece t > z0 and mirrored lower piece t < z0
    lu = np.maximum(al, z0)
    hu = np.maximum(be, lu)
    lul_u, up_mass, rat_u = _upper_mass(z0, lu, hu)
    hd = np.minimum(be, z0)
    ld, hdm = -hd, np.maximum(-al, -hd)
    lul_d, dn_mass, rat_d = _upper_mass(-z0, ld, hdm)
    total = up_mass + dn_mass
    with np.errstate(invalid="ignore", divide="ignore"):
        tau = w * total
        in_dn = tau < dn_mass
        frac_up = np.where(up_mass > 0, (tau - dn_mass) / up_mass, 0.0)
        frac_dn = np.where(dn_mass > 0, 1.0 - tau / dn_mass, 0.0)
    z = np.empty_like(m)
    iu = ~in_dn
    if iu.any():
        z[iu] = _upper_draw(z0[iu], lu[iu], hu[iu], np.clip(frac_up[iu], 0, 1), lul_u[iu], rat_u[iu])
    if in_dn.any():
        z[in_dn] = -_upper_draw(-z0[in_dn], ld[in_dn], hdm[in_dn], np.clip(frac_dn[in_dn], 0, 1),
                                lul_d[in_dn], rat_d[in_dn])
    return s * total, z


def _size_biased_mean(m: float, s: float, a: float, b: float) -> float:
    """Mean of z under the density prop. to |m + s z| phi(z) on the standardized bounds."""
    z0 = -m / s
    al, be = max((a - m) / s, -_ZMAX), min((b - m) / s, _ZMAX)

    def moments(l, h):
        if h <= l:
            return 0.0, 0.0, 0.0
        pl, ph = math.exp(-0.5 * l * l) / _SQ2PI, math.exp(-0.5 * h * h) / _SQ2PI
        m0 = float(_pdiff(np.float64(l), np.float64(h)))
        m1 = pl - ph
        m2 = m0 + l * pl - h * ph
        return m0, m1, m2

    u0, u1, u2 = moments(max(al, z0), be)
    d0, d1, d2 = moments(al, min(be, z0))
    num = (u2 - z0 * u1) - (d2 - z0 * d1)
    den = (u1 - z0 * u0) - (d1 - z0 * d0)
    if den <= 1e-300:
        return float(np.clip(z0, al, be))
    return num / den


# ---------------------------------------------------------------------------
# conditioning and separation of variables


def condition(problem: MvnProblem, ridge: float = 1e-10) -> MvnProblem:
    """Eliminate the conditioning variables.

    Returns an equivalent problem on the remaining variables with the
    conditional mean and Schur-complement covariance; the Gaussian density of
    the conditioning values is folded into ``factor``.
    """
    c = list(problem.cond_index)
    if not c:
        return problem
    keep = [i for i in range(problem.dim) if i not in set(c)]
    S = problem.cov
    scc = S[np.ix_(c, c)]
    if ridge and _numerically_singular(scc, ridge):
        scc = scc + ridge * max(1.0, float(np.max(np.diag(scc)))) * np.eye(len(c))
    try:
        chol = np.linalg.cholesky(scc)
    except np.linalg.LinAlgError:
        ev = np.linalg.eigvalsh(scc)
        rank = int(np.sum(ev > 1e-12 * ev.max()))
        raise ValueError(f"conditioning block singular (rank {rank} of {len(c)})") from None
    dev = np.asarray(problem.cond_value) - problem.mean[c]
    skc = S[np.ix_(keep, c)]
    a = np.linalg.solve(chol, skc.T)  # L^-1 S_ck
    b = np.linalg.solve(chol, dev)
    mean = problem.mean[keep] + a.T @ b
    cov = S[np.ix_(keep, keep)] - a.T @ a
    logdet = 2 * np.sum(np.log(np.diag(chol)))
    dens = math.exp(-0.5 * float(b @ b) - 0.5 * logdet - len(c) * _LOG_SQ2PI)
    pos = {old: new for new, old in enumerate(keep)}
    weights = tuple((pos[i], s) for i, s in problem.weights)
    return MvnProblem(
        cov=cov,
        mean=mean,
        lower=problem.lower[keep],
        upper=problem.upper[keep],
        weights=weights,
        factor=problem.factor * dens,
    )


@dataclass(frozen=True, eq=False)
class SovPlan:
    """Unit-cube integrand produced by :func:`sov_transform`.

    Rows are in pivot order: the first ``n_random`` rows are integration
    variables (weights first), the rest are resolved deterministically from
    them. ``L`` has one column per integration variable.
    """

    L: np.ndarray
    mean: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    is_weight: np.ndarray
    n_random: int
    resid_sd: np.ndarray
    factor: float
    order: np.ndarray

    @property
    def n_det(self) -> int:
        return self.L.shape[0] - self.n_random


def _numerically_singular(S: np.ndarray, ridge: float) -> bool:
    if S.size == 0:
        return False
    try:
        Lc = np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        return True
    return float(np.min(np.diag(Lc))) ** 2 < ridge * max(1.0, float(np.max(np.diag(S))))


def sov_transform(problem: MvnProblem, sd_tol: float = 1e-6, ordering: str = "greedy",
                  pivot_tol: float = 1e-10, ridge: float = 1e-10, rng: np.random.Generator | None = None) -> SovPlan:
    """Pivoted Cholesky separation of variables.

    Variables whose conditional standard deviation drops below
    ``sd_tol`` times their marginal standard deviation (or whose pivot is
    below ``pivot_tol``) are resolved deterministically. ``ordering`` is
    ``'greedy'`` (smallest conditional interval probability first),
    ``'natural'`` or ``'random'``.
    """
    p = condition(problem)
    n0 = p.dim
    wmask = np.zeros(n0, dtype=bool)
    lo, hi = p.lower.copy(), p.upper.copy()
    for i, s in p.weights:
        wmask[i] = True
        a, b = _SIGNS[s]
        lo[i], hi[i] = max(lo[i], a), min(hi[i], b)
    if np.any(lo > hi) or np.any((lo == hi) & np.isinf(lo)):
        return _empty_plan(0.0)
    active = wmask | np.isfinite(lo) | np.isfinite(hi)
    idx = np.nonzero(active)[0]
    S = p.cov[np.ix_(idx, idx)]
    ridged = bool(ridge) and _numerically_singular(S, ridge)
    if ridged:
        # relative ridge keeps the pivoted factorisation stable on rank-deficient input
        S = S + ridge * max(1.0, float(np.max(np.diag(S)))) * np.eye(idx.size)
        # residuals at the ridge scale mark dependent variables
        sd_tol = max(sd_tol, 3.0 * math.sqrt(ridge))
    mu, lo, hi, wmask = p.mean[idx], lo[idx], hi[idx], wmask[idx]
    n = idx.size
    if n == 0:
        return _empty_plan(p.factor)
    d = np.diag(S).copy()
    scale = np.sqrt(np.maximum(d, 0.0))
    if np.any(d < -1e-8 * max(1.0, float(np.max(np.abs(d))))):
        raise ValueError("covariance has negative variances")
    L = np.zeros((n, n))
    cbar = np.zeros(n)
    remaining = np.ones(n, dtype=bool)
    pivots: list[int] = []
    det: list[int] = []
    if ordering == "random":
        rng = rng or np.random.default_rng(0)
        rand_key = rng.permutation(n)
    tiny = pivot_tol * max(1.0, float(np.max(scale)))
    j = 0
    while remaining.any():
        cand = np.nonzero(remaining)[0]
        dc = d[cand]
        if np.any(dc < -1e-8 * np.maximum(1.0, scale[cand] ** 2)):
            raise ValueError(f"covariance not positive semidefinite (residual {dc.min():.3e})")
        sd = np.sqrt(np.maximum(dc, 0.0))
        small = (sd <= sd_tol * scale[cand]) | (sd <= tiny)
        if small.any():
            det.extend(cand[small].tolist())
            remaining[cand[small]] = False
            cand, sd = cand[~small], sd[~small]
            if cand.size == 0:
                break
        wc = wmask[cand]
        if wc.any():
            # weights lead, in the given order
            k = int(cand[np.nonzero(wc)[0][0]])
            sk = float(sd[np.nonzero(wc)[0][0]])
        else:
            if ordering == "greedy":
                m = mu[cand] + cbar[cand]
                prob = _pdiff((lo[cand] - m) / sd, (hi[cand] - m) / sd)
                pos = int(np.argmin(prob))
            elif ordering == "natural":
                pos = 0
            elif ordering == "random":
                pos = int(np.argmin(rand_key[cand]))
            else:
                raise ValueError(f"unknown ordering {ordering!r}")
            k, sk = int(cand[pos]), float(sd[pos])
        remaining[k] = False
        rest = np.nonzero(remaining)[0]
        L[k, j] = sk
        if rest.size:
            col = (S[rest, k] - L[rest, :j] @ L[k, :j]) / sk
            L[rest, j] = col
            d[rest] -= col * col
        mk = mu[k] + cbar[k]
        if wmask[k]:
            ybar = _size_biased_mean(mk, sk, lo[k], hi[k])
        else:
            ybar = _trunc_mean((lo[k] - mk) / sk, (hi[k] - mk) / sk)
        if rest.size:
            cbar[rest] += L[rest, j] * ybar
        pivots.append(k)
        j += 1
    r = len(pivots)
    perm = np.array(pivots + det, dtype=int)
    return SovPlan(
        L=L[perm][:, :r].copy(),
        mean=mu[perm],
        lower=lo[perm],
        upper=hi[perm],
        is_weight=wmask[perm],
        n_random=r,
        resid_sd=np.sqrt(np.maximum(d[perm], 0.0)),
        factor=p.factor,
        order=idx[perm],
    )


def _empty_plan(factor: float) -> SovPlan:
    z = np.zeros(0)
    return SovPlan(np.zeros((0, 0)), z, z, z, np.zeros(0, dtype=bool), 0, z, factor, np.zeros(0, dtype=int))


# ---------------------------------------------------------------------------
# integrand and QMC driver


def _evaluate(plan: SovPlan, U: np.ndarray, want_terr: bool = False):
    r = plan.n_random
    N = U.shape[1]
    val = np.ones(N)
    Y = np.empty((r, N))
    L, mu, lo, hi = plan.L, plan.mean, plan.lower, plan.upper
    kind = np.where(np.isinf(hi), 1, np.where(np.isinf(lo), 2, 0))
    for j in range(r):
        c = mu[j] + (L[j, :j] @ Y[:j] if j else 0.0)
        c = np.broadcast_to(c, (N,))
        s = L[j, j]
        if plan.is_weight[j]:
            f, z = _weighted_draw(np.array(c, dtype=float), s, lo[j], hi[j], U[j])
        elif kind[j] == 1:
            # X >= lo only: mass Q(alpha), draw -Phi^-1(w Q(alpha))
            f = ndtr((c - lo[j]) / s)
            z = -ndtri(np.maximum(U[j] * f, 1e-300))
        elif kind[j] == 2:
            f = ndtr((hi[j] - c) / s)
            z = ndtri(np.maximum(U[j] * f, 1e-300))
        else:
            f, z = _trunc_draw((lo[j] - c) / s, (hi[j] - c) / s, U[j])
        val *= f
        Y[j] = z
    terr = None
    if plan.n_det:
        C = mu[r:, None] + (L[r:] @ Y if r else 0.0)
        C = np.broadcast_to(C, (plan.n_det, N))
        ind = (C >= lo[r:, None]) & (C <= hi[r:, None])
        wrow = plan.is_weight[r:]
        if want_terr:
            s = np.maximum(plan.resid_sd[r:], 1e-300)[:, None]
            with np.errstate(invalid="ignore", divide="ignore"):
                p = _pdiff((lo[r:, None] - C) / s, (hi[r:, None] - C) / s)
            terr = val * np.sum(np.abs(np.where(wrow[:, None], 0.0, p) - np.where(wrow[:, None], 0.0, ind)), axis=0)
        val = val * np.all(ind, axis=0)
        if wrow.any():
            val = val * np.prod(np.abs(C[wrow]), axis=0)
    return val, terr


def _integrate(plan: SovPlan, opts: MvnOptions) -> IntegralResult:
    n, m, _ = opts.resolved()
    r = plan.n_random
    if plan.factor == 0.0 or (plan.L.shape[0] == 0):
        return IntegralResult(plan.factor if plan.L.shape[0] == 0 else 0.0, 0.0, 0.0, 1, opts.seed,
                              np.full(m, plan.factor if plan.L.shape[0] == 0 else 0.0))
    if r == 0:
        v, _ = _evaluate(plan, np.zeros((0, 1)))
        val = plan.factor * float(v[0])
        return IntegralResult(val, 0.0, 0.0, 1, opts.seed, np.full(m, val))
    if r > opts.max_dim:
        raise ValueError(f"{r} integration variables exceed max_dim={opts.max_dim}")
    z = generating_vector(n, max(r, 400))[:r]
    rng = np.random.default_rng(opts.seed)
    shifts = rng.random((m, r))
    base = (np.outer(z, np.arange(n, dtype=np.int64)) % n) / n
    per = max(1, opts.chunk // n)
    means = np.empty(m)
    terr = 0.0
    for s0 in range(0, m, per):
        block = range(s0, min(m, s0 + per))
        U = np.concatenate([base + shifts[i][:, None] for i in block], axis=1)
        U -= np.floor(U)
        U = 1.0 - np.abs(2.0 * U - 1.0)
        vals, te = _evaluate(plan, U, want_terr=(s0 == 0))
        means[s0 : s0 + len(block)] = vals.reshape(len(block), n).mean(axis=1)
        if te is not None:
            terr = float(np.mean(te))
    f = plan.factor
    value = f * float(means.mean())
    err = 3.0 * abs(f) * float(means.std(ddof=1)) / math.sqrt(m)
    return IntegralResult(value, err, abs(f) * terr, n * m, opts.seed, f * means)


def mvn_expectation(problem: MvnProblem, opts: MvnOptions | None = None) -> IntegralResult:
    """Weighted or unweighted expectation; see the module docstring."""
    opts = opts or MvnOptions()
    n, m, tol = opts.resolved()
    if problem.dim - len(problem.cond_index) > opts.max_dim:
        raise ValueError(f"dimension exceeds max_dim={opts.max_dim}")
    plan = sov_transform(problem, sd_tol=tol, ordering=opts.ordering,
                         rng=np.random.default_rng(opts.seed))
    return _integrate(plan, opts)


def mvn_probability(problem: MvnProblem, opts: MvnOptions | None = None) -> IntegralResult:
    """P(lower <= X <= upper | X_c = x_c) f(x_c) for a problem without weights."""
    if problem.weights:
        raise ValueError("mvn_probability does not accept weight variables; use mvn_weighted")
    return mvn_expectation(problem, opts)


def mvn_weighted(problem: MvnProblem, opts: MvnOptions | None = None) -> IntegralResult:
    """Derivative-weighted expectation; at least one weight variable is required."""
    if not problem.weights:
        raise ValueError("mvn_weighted needs at least one weight variable")
    return mvn_expectation(problem, opts)


def dump_problem_csv(problem: MvnProblem, path) -> None:
    """Write the conditioned problem (mean, bounds, role, covariance rows) to CSV."""
    p = condition(problem)
    role = ["indicator"] * p.dim
    for i, s in p.weights:
        role[i] = f"weight{s}"
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["# factor", repr(p.factor)])
        wr.writerow(["index", "role", "mean", "lower", "upper"] + [f"cov{j}" for j in range(p.dim)])
        for i in range(p.dim):
            wr.writerow([i, role[i], repr(p.mean[i]), repr(p.lower[i]), repr(p.upper[i])]
                        + [repr(x) for x in p.cov[i]])
