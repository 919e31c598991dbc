"""Independent Interval Approximation (IIA) for the clipped process sign(X(t) - u).

The covariance of the clipped process is matched, through its Laplace
transform, to that of a symmetric alternating renewal (switch) process.
Solving for the interval Laplace transform Psi(s) and taking minus its
largest negative pole gives the IIA persistence exponent.  For the
two-dimensional diffusion the Laplace transform has an explicit series,
which yields rational approximations Psi_L with explicit partial fractions.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import mpmath as mp
import numpy as np
from scipy import integrate, optimize, signal, special

from .covmodel import CovarianceModel

__all__ = [
    "LaplaceCov",
    "LaplaceApprox",
    "ValidityResult",
    "clipped_covariance",
    "clipped_evaluator",
    "clipped_spectrum",
    "laplace_cov",
    "rational_continuation",
    "psi_from_cov",
    "switch_cov_laplace",
    "switch_cov_laplace_sym",
    "theta_iia",
    "diffusion2d_laplace",
    "diffusion2d_series",
    "quasi_cdf",
    "iia_validity_check",
]


# ---------------------------------------------------------------------------
# clipped covariance


def _rho(model: CovarianceModel, t):
    return np.asarray(model(t), dtype=float) / float(model(0.0))


def clipped_covariance(model: CovarianceModel, u: float, t: float, method: str = "quad") -> float:
    """Covariance of sign(X(t) - u) and sign(X(0) - u).

    ``method='quad'`` integrates the conditional normal cdf over X(0) < u;
    ``method='owen'`` uses the Owen's T representation of the bivariate
    normal orthant.
    """
    s0 = math.sqrt(float(model(0.0)))
    h = u / s0
    F = special.ndtr(h)
    if t == 0:
        return float(4 * F * (1 - F))
    rho = float(_rho(model, t))
    if abs(rho) >= 1:
        raise ValueError(f"degenerate correlation {rho} at t={t}")
    if method == "owen":
        return float(4 * (_bvn_diag(h, rho) - F * F))
    if method != "quad":
        raise ValueError(f"unknown method {method!r}")
    c = math.sqrt(1 - rho * rho)

    def integrand(x):
        return math.exp(-0.5 * x * x) / math.sqrt(2 * math.pi) * special.ndtr((h - rho * x) / c)

    # split at the origin and near the conditional mean to keep quad accurate
    pts = sorted({min(h, 0.0), min(h, -8.0)})
    both = 0.0
    lo = -np.inf
    for p in pts + [h]:
        if p > lo:
            val, _ = integrate.quad(integrand, lo, p, epsabs=1e-15, epsrel=1e-13, limit=200)
            both += val
            lo = p
    return float(4 * (both - F * F))


def _bvn_diag(h, rho):
    """P(X < h, Y < h) for a standard bivariate normal with correlation rho."""
    rho = np.asarray(rho, dtype=float)
    a = np.sqrt((1 - rho) / (1 + rho))
    return special.ndtr(h) - 2 * special.owens_t(h, a)


def clipped_evaluator(model: CovarianceModel, u: float = 0.0) -> Callable:
    """Vectorized t -> clipped covariance (arcsine law at u = 0, Owen's T otherwise)."""
    h = u / math.sqrt(float(model(0.0)))
    F = float(special.ndtr(h))

    def R(t):
        rho = np.clip(_rho(model, np.abs(t)), -1.0, 1.0)
        if h == 0:
            return 2 / np.pi * np.arcsin(rho)
        out = 4 * (_bvn_diag(h, np.clip(rho, -1 + 1e-15, 1 - 1e-15)) - F * F)
        return np.where(rho >= 1, 4 * F * (1 - F), out)

    return R


def clipped_spectrum(model: CovarianceModel, omega: np.ndarray, method: str = "cosine",
                     n_terms: int = 8, u: float = 0.0) -> np.ndarray:
    """One-sided spectral density of the clipped covariance on ``omega``.

    ``method='cosine'`` integrates (2/pi) int_0^inf cos(w t) R(t) dt;
    ``method='series'`` uses the arcsine series of odd convolution powers of
    the model spectrum (``n_terms`` terms, u = 0 only).
    """
    omega = np.asarray(omega, dtype=float)
    if method == "cosine":
        R = clipped_evaluator(model, u)
        out = np.empty_like(omega)
        for i, w in enumerate(omega):
            f = lambda t: float(R(t))
            if w == 0:
                val = integrate.quad(f, 0, np.inf, limit=500)[0]
            else:
                val = integrate.quad(f, 0, np.inf, weight="cos", wvar=w, limlst=200)[0]
            out[i] = 2 / np.pi * val
        return out
    if method != "series":
        raise ValueError(f"unknown method {method!r}")
    if u != 0:
        raise ValueError("the arcsine series applies at u = 0 only")
    if not (omega.size > 2 and np.allclose(np.diff(omega), omega[1] - omega[0]) and omega[0] == 0):
        raise ValueError("series method needs a uniform grid starting at 0")
    dw = omega[1] - omega[0]
    # two-sided unit-mass density of r/r(0)
    s1 = np.asarray(model.spectrum(omega), dtype=float) / float(model(0.0)) / 2
    two = np.concatenate([s1[:0:-1], s1])
    total = np.zeros_like(two)
    power = two.copy()
    n0 = s1.size - 1
    coef = 1.0
    for n in range(n_terms):
        if n:
            coef *= (2 * n - 1) / (2 * n)
            for _ in range(2):
                full = signal.fftconvolve(power, two) * dw
                c = full.size // 2
                power = full[c - n0 : c + n0 + 1]
        total += coef / (2 * n + 1) * power
    # FFT round-off leaves tiny negative values in the far tail
    return np.maximum(2 * (2 / np.pi) * total[n0:], 0.0)


# ---------------------------------------------------------------------------
# Laplace transforms


@dataclass
class LaplaceCov:
    """Laplace transform of a covariance, valid for s > s_min.

    ``method`` is ``'quadrature'``, ``'series'`` or ``'rational'``.
    """

    func: Callable
    s_min: float
    method: str
    meta: dict = field(default_factory=dict)

    def __call__(self, s):
        s_arr = np.asarray(s, dtype=float)
        if np.any(s_arr <= self.s_min):
            raise ValueError(f"s must exceed s_min={self.s_min}")
        if s_arr.ndim == 0:
            return float(self.func(float(s_arr)))
        return np.array([self.func(float(x)) for x in s_arr.ravel()]).reshape(s_arr.shape)


def _decay_fit(R: Callable, t_cap: float):
    """Find a truncation point and, if the tail is exponential, its rate and amplitude."""
    T = 1.0
    while T < t_cap and abs(float(R(T))) > 1e-11:
        T *= 1.5
    T = min(T, t_cap)
    ts = np.linspace(0.6 * T, T, 9)
    r = np.array([float(R(t)) for t in ts])
    if np.all(r > 0):
        k, logc = np.polyfit(ts, np.log(r), 1)
        resid = np.log(r) - (k * ts + logc)
        if k < 0 and np.max(np.abs(resid)) < 1e-3:
            return T, -k, True
    return T, 0.0, False


def _quad_laplace(R: Callable, T: float, kappa: float, exp_tail: bool) -> Callable:
    def LR(s):
        if exp_tail:
            upper = T
        else:
            upper = min(T, 40.0 / s) if s > 0 else T
        pts = [p for p in (1.0 / abs(s) if s else None, 10.0 / abs(s) if s else None) if p and p < upper]
        f = lambda t: math.exp(-s * t) * float(R(t))
        val = integrate.quad(f, 0.0, upper, points=pts or None, limit=2000, epsabs=1e-14, epsrel=1e-12)[0]
        if exp_tail:
            val += float(R(T)) * math.exp(-s * T) / (s + kappa)
        return val

    return LR


def laplace_cov(R: Callable, s=None, *, t_cap: float = 5000.0, decay: float | None = None):
    """Laplace transform of a covariance by adaptive quadrature with an exponential tail closure.

    With ``s`` given, returns the transform at s; otherwise returns the
    :class:`LaplaceCov` evaluator.  When the covariance decays exponentially
    at rate kappa the transform is continued to s > -kappa.
    """
    T, kappa, exp_tail = _decay_fit(R, t_cap)
    if decay is not None:
        kappa, exp_tail = float(decay), True
    lc = LaplaceCov(_quad_laplace(R, T, kappa, exp_tail), -kappa if exp_tail else 0.0, "quadrature",
                    {"t_trunc": T, "decay": kappa})
    return lc if s is None else lc(s)


def rational_continuation(LR: LaplaceCov, num_deg: int = 8, den_deg: int = 9,
                          s_fit: np.ndarray | None = None) -> LaplaceCov:
    """Fit N(s)/D(s) to LR on s > 0 and use it to continue LR to negative s.

    The fit is linear least squares on LR*D - N = 0 with D(0) = 1.  The
    continuation is heuristic; its domain ends at the largest real pole.
    """
    s = np.geomspace(0.02, 50.0, 240) if s_fit is None else np.asarray(s_fit, dtype=float)
    y = LR(s)
    sc = np.sqrt(s.max() * s.min())
    x = s / sc
    A = np.hstack([np.vander(x, num_deg + 1, increasing=True),
                   -(y[:, None] * np.vander(x, den_deg + 1, increasing=True)[:, 1:])])
    w = 1.0 / np.maximum(np.abs(y), 1e-300)
    coef, *_ = np.linalg.lstsq(A * w[:, None], y * w, rcond=None)
    p = coef[: num_deg + 1]
    q = np.concatenate([[1.0], coef[num_deg + 1 :]])
    roots = np.roots(q[::-1]) * sc
    real = roots[np.abs(roots.imag) < 1e-8 * np.maximum(1, np.abs(roots))].real
    s_min = float(real.max()) if real.size and real.max() < 0 else 0.0
    if real.size and real.max() >= 0:
        warnings.warn("rational fit has a nonnegative real pole; continuation not available")

    def func(v):
        xv = v / sc
        return float(np.polyval(p[::-1], xv) / np.polyval(q[::-1], xv))

    return LaplaceCov(func, s_min, "rational", {"num": p, "den": q, "scale": sc})


def psi_from_cov(LR, mu: float, s: float) -> float:
    """Interval Laplace transform of the symmetric switch process matching LR."""
    if s == 0:
        return 1.0
    g = s * mu * (1 - s * LR(s))
    den = 2 + g
    if den == 0:
        raise ZeroDivisionError(f"pole of Psi at s={s}")
    return (2 - g) / den


def switch_cov_laplace(psi_p, psi_m, mu_p: float, mu_m: float, s: float, h: float = 1e-3) -> float:
    """Laplace transform of the covariance of an alternating renewal switch process.

    ``psi_p`` and ``psi_m`` are callables (interval Laplace transforms).
    s = 0 is removable and evaluated by Richardson extrapolation.
    """
    if s == 0:
        f1 = switch_cov_laplace(psi_p, psi_m, mu_p, mu_m, h)
        f2 = switch_cov_laplace(psi_p, psi_m, mu_p, mu_m, h / 2)
        f4 = switch_cov_laplace(psi_p, psi_m, mu_p, mu_m, h / 4)
        r1, r2 = 2 * f2 - f1, 2 * f4 - f2
        return (4 * r2 - r1) / 3
    pp, pm = psi_p(s), psi_m(s)
    M = mu_p + mu_m
    return 4 / (s * M) * (mu_p * mu_m / M - (1 - pp) * (1 - pm) / (s * (1 - pm * pp)))


def switch_cov_laplace_sym(psi, mu: float, s: float) -> float:
    """Symmetric-case form of :func:`switch_cov_laplace`."""
    p = psi(s)
    return (1 - 2 / (s * mu) * (1 - p) / (1 + p)) / s


def theta_iia(LR: LaplaceCov, mu: float, n_scan: int = 400) -> float:
    """Minus the largest negative zero of 2 + s mu (1 - s LR(s)) on (s_min, 0)."""

    def g(s):
        return 2 + s * mu * (1 - s * LR(s))

    lo = LR.s_min
    span = -lo if lo < 0 else None
    if span is None:
        raise ValueError("LR has no continuation to negative s")
    grid = -span * (np.arange(1, n_scan) / n_scan)
    prev_s, prev_g = 0.0, 2.0
    for s in grid:
        gs = g(s)
        if not np.isfinite(gs):
            break
        if gs * prev_g <= 0:
            return -optimize.brentq(g, s, prev_s, xtol=1e-14, rtol=1e-13)
        prev_s, prev_g = s, gs
    raise ValueError("no sign change of 2 + s mu (1 - s LR) on (s_min, 0)")


# ---------------------------------------------------------------------------
# diffusion in two dimensions: explicit series


def _prec_for(L: int) -> int:
    return 40 + 2 * L


def _rising(p0, L: int):
    """Coefficient lists (increasing powers) of (s+1/2)(s+3/2)...(s+1/2+k-1), k = 0..L+1."""
    polys = [[mp.mpf(1)]]
    for k in range(L + 1):
        prev = polys[-1]
        a = mp.mpf(k) + p0
        nxt = [mp.mpf(0)] * (len(prev) + 1)
        for i, c in enumerate(prev):
            nxt[i] += a * c
            nxt[i + 1] += c
        polys.append(nxt)
    return polys


def _pmul(a, b):
    out = [mp.mpf(0)] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            out[i + j] += x * y
    return out


def _padd(a, b):
    n = max(len(a), len(b))
    return [(a[i] if i < len(a) else 0) + (b[i] if i < len(b) else 0) for i in range(n)]


def _pscale(a, c):
    return [c * x for x in a]


def _diffusion_polys(L: int):
    """Q_L and the product (s+1/2)...(s+1/2+L) as mp coefficient lists (increasing powers)."""
    half = mp.mpf(1) / 2
    rise = _rising(half, L)  # rise[k] = (s+1/2)_k
    Q = [mp.mpf(0)]
    for l in range(L + 1):
        P = [mp.mpf(1)]
        for k in range(1, l + 1):
            c = mp.binomial(l + k, k) / (mp.mpf(2) ** k * (2 * k + 1) * mp.factorial(k))
            P = _padd(P, _pscale(rise[k], c))
        P = _pscale(P, mp.factorial(l) / (mp.pi * mp.mpf(2) ** (l - 1)))
        # remaining factors (s+1/2+l+1)...(s+1/2+L)
        tail = [mp.mpf(1)]
        for j in range(l + 1, L + 1):
            tail = _pmul(tail, [half + j, mp.mpf(1)])
        Q = _padd(Q, _pmul(P, tail))
    return Q, rise[L + 1]


def _peval(c, s):
    v = mp.mpf(0)
    for x in reversed(c):
        v = v * s + x
    return v


def diffusion2d_laplace(L: int = 60) -> LaplaceCov:
    """Truncated series for the Laplace transform of (2/pi) arcsin(sech(t/2)), continued to s > -1/2."""
    with mp.workdps(_prec_for(L)):
        Q, Pi = _diffusion_polys(L)

    def func(s):
        with mp.workdps(_prec_for(L)):
            return float(_peval(Q, mp.mpf(s)) / _peval(Pi, mp.mpf(s)))

    return LaplaceCov(func, -0.5, "series", {"L": L})


@dataclass
class LaplaceApprox:
    """Rational IIA approximation Psi_L(s) = N(s)/D(s) - 1 of the interval Laplace transform.

    Coefficients are in increasing powers of s.  ``poles`` and ``residues``
    give the partial fractions; the measure has an atom ``atom_at_zero`` at 0.
    """

    order: int
    numerator: np.ndarray
    denominator: np.ndarray
    poles: np.ndarray
    residues: np.ndarray
    atom_at_zero: float
    theta_L: float
    mu: float

    @property
    def total_mass(self) -> float:
        return float(np.real(np.sum(self.residues / (-self.poles))) + self.atom_at_zero)

    def psi(self, s):
        s = np.asarray(s, dtype=float)
        return np.real(np.sum(self.residues[:, None] / (s.ravel()[None, :] - self.poles[:, None]), axis=0)
                       ).reshape(s.shape) + self.atom_at_zero


def diffusion2d_series(L: int, mu: float = 2 * math.pi) -> LaplaceApprox:
    """Order-L rational IIA approximation for the two-dimensional diffusion.

    Poles are all roots of D(s) = (2 + s mu) Pi(s) - mu s^2 Q_L(s), found in
    extended precision; residues are N(p)/D'(p) with N = 4 Pi.
    """
    if L < 0 or L > 200:
        raise ValueError("L must be in 0..200")
    dps = _prec_for(L)
    with mp.workdps(dps):
        Q, Pi = _diffusion_polys(L)
        m = mp.mpf(mu)
        D = _padd(_pmul([mp.mpf(2), m], Pi), _pscale([mp.mpf(0), mp.mpf(0)] + Q, -m))
        N = _pscale(Pi, 4)
        roots = mp.polyroots(list(reversed(D)), maxsteps=400 + 20 * L, extraprec=4 * dps)
        dD = [i * c for i, c in enumerate(D)][1:]
        res = [_peval(N, r) / _peval(dD, r) for r in roots]
        roots_c = np.array([complex(r) for r in roots])
        res_c = np.array([complex(r) for r in res])
        real = np.abs(roots_c.imag) < 1e-20 + 1e-12 * np.abs(roots_c)
        neg_real = roots_c.real[real & (roots_c.real < 0)]
        if neg_real.size == 0:
            raise ValueError("no negative real pole")
        s1 = float(neg_real.max())
        # polish the leading pole by bisection on D
        lo, hi = mp.mpf(s1) * (1 + mp.mpf(10) ** -8), mp.mpf(s1) * (1 - mp.mpf(10) ** -8)
        f_lo, f_hi = _peval(D, lo), _peval(D, hi)
        if f_lo * f_hi < 0:
            for _ in range(80):
                mid = (lo + hi) / 2
                fm = _peval(D, mid)
                if fm * f_lo <= 0:
                    hi = mid
                else:
                    lo, f_lo = mid, fm
            s1 = float((lo + hi) / 2)
    order = np.argsort(-roots_c.real)
    roots_c, res_c = roots_c[order], res_c[order]
    gaps = np.abs(roots_c[:, None] - roots_c[None, :]) + np.eye(roots_c.size) * 1e9
    if np.any(gaps < 1e-9):
        raise ValueError("repeated poles within 1e-9")
    if np.all(np.abs(roots_c.imag) < 1e-12 * np.maximum(1, np.abs(roots_c))):
        roots_c, res_c = roots_c.real, res_c.real
    return LaplaceApprox(L, np.array([float(c) for c in N]), np.array([float(c) for c in D]),
                         roots_c, res_c, -1.0, -s1, mu)


def quasi_cdf(approx: LaplaceApprox, t_grid) -> np.ndarray:
    """Cumulative signed measure of Psi_L: atom at 0 plus the inverted partial fractions."""
    t = np.asarray(t_grid, dtype=float)
    p, r = approx.poles, approx.residues
    cont = np.sum((r / (-p))[:, None] * (1 - np.exp(np.outer(p, t.ravel()))), axis=0)
    return (approx.atom_at_zero + np.real(cont)).reshape(t.shape)


# ---------------------------------------------------------------------------
# validity of the IIA interval law


@dataclass
class ValidityResult:
    """Both sides of the necessary condition lhs(s) >= rhs(s) on an s grid."""

    s: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    first_violation: float | None

    @property
    def violated(self) -> bool:
        return self.first_violation is not None


def _validity_from_cov(R: Callable, s_arr: np.ndarray) -> ValidityResult:
    # with L = int e^{-st} R and L1 = int t e^{-st} R:
    #   int g0(w/s) dS = 4 s L - 3 s (L + s L1) / 2
    #   int g4(w/s) dS = R(0) - 2 s L + s (L + s L1) / 2
    T, _, _ = _decay_fit(R, 5000.0)
    r0 = float(R(0.0))
    lhs, rhs = np.empty_like(s_arr), np.empty_like(s_arr)
    for i, s in enumerate(s_arr):
        upper = min(T, 60.0 / s)
        L0 = integrate.quad(lambda t: math.exp(-s * t) * float(R(t)), 0, upper, limit=1000, epsabs=1e-13)[0]
        L1 = integrate.quad(lambda t: t * math.exp(-s * t) * float(R(t)), 0, upper, limit=1000, epsabs=1e-13)[0]
        m = s * (L0 + s * L1)
        rhs[i] = 4 * s * L0 - 1.5 * m
        lhs[i] = r0 - 2 * s * L0 + 0.5 * m
    bad = np.nonzero(lhs < rhs)[0]
    return ValidityResult(s_arr, lhs, rhs, float(s_arr[bad[0]]) if bad.size else None)


def iia_validity_check(spectrum, s_grid: Sequence[float], kind: str = "density") -> ValidityResult:
    """Check the first Bernstein condition for the IIA Psi implied by a spectrum.

    For a switch process covariance with spectral measure S_R on [0, inf),
    int g4(w/s) dS_R >= int g0(w/s) dS_R must hold for every s > 0, where
    g4(x) = x^4/(1+x^2)^2 and g0(x) = (1+4x^2)/(1+x^2)^2.  The result does
    not depend on mu.

    Parameters
    ----------
    spectrum : (omega, values) on a grid from 0, or a callable density,
        or (omega, masses) for ``kind='atoms'``, or a covariance callable
        R(t) for ``kind='covariance'``.
    s_grid : increasing positive values of s.
    kind : ``'density'``, ``'atoms'`` or ``'covariance'``.  The covariance
        route evaluates both sides from Laplace transforms of R and t R.
    """
    s_arr = np.asarray(s_grid, dtype=float)
    if np.any(s_arr <= 0):
        raise ValueError("s must be positive")
    if kind == "covariance":
        return _validity_from_cov(spectrum, s_arr)
    g4 = lambda x: x**4 / (1 + x * x) ** 2
    g0 = lambda x: (1 + 4 * x * x) / (1 + x * x) ** 2
    lhs, rhs = np.empty_like(s_arr), np.empty_like(s_arr)
    if callable(spectrum):
        for i, s in enumerate(s_arr):
            lhs[i] = integrate.quad(lambda w: g4(w / s) * spectrum(w), 0, np.inf, limit=400)[0]
            rhs[i] = integrate.quad(lambda w: g0(w / s) * spectrum(w), 0, np.inf, limit=400)[0]
    else:
        w, v = (np.asarray(a, dtype=float) for a in spectrum)
        if np.any(v < 0):
            raise ValueError("spectrum must be nonnegative")
        for i, s in enumerate(s_arr):
            x = w / s
            if kind == "atoms":
                lhs[i], rhs[i] = np.sum(g4(x) * v), np.sum(g0(x) * v)
            elif kind == "density":
                lhs[i], rhs[i] = np.trapezoid(g4(x) * v, w), np.trapezoid(g0(x) * v, w)
            else:
                raise ValueError(f"unknown kind {kind!r}")
    bad = np.nonzero(lhs < rhs)[0]
    return ValidityResult(s_arr, lhs, rhs, float(s_arr[bad[0]]) if bad.size else None)
