"""Stationary covariance models, spectral moments and block covariances.

Every model is a kernel r0(t) together with a time scale ``c`` and an
amplitude ``a``; the model covariance is ``r(t) = r0(c t) / a``.  Kernels
provide analytic derivatives where they exist, or cosine-transform
quadrature of a tabulated one-sided spectrum.

The one-sided spectrum convention is used throughout::

    r(t) = int_0^inf cos(w t) S1(w) dw,   lambda_k = int_0^inf w^k S1(w) dw
"""
from __future__ import annotations

import csv
import logging
import math
import re
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import polynomial as npoly

log = logging.getLogger(__name__)

__all__ = [
    "MomentUndefinedError",
    "AliasingError",
    "NotPositiveDefiniteError",
    "SpectralMoments",
    "TabulatedSpectrum",
    "CovarianceModel",
    "GridSpec",
    "BlockCovariance",
    "get_model",
    "catalog_codes",
    "eval_cov",
    "eval_cov_d1",
    "eval_cov_d2",
    "eval_cov_d4",
    "spectral_moments",
    "normalize",
    "spectrum_to_cov",
    "build_block_covariance",
    "lag_table",
    "read_spectrum_csv",
]


class MomentUndefinedError(ValueError):
    """Requested derivative or moment does not exist for the model."""


class AliasingError(ValueError):
    """Cosine-transform grid cannot resolve the requested time lags."""


class NotPositiveDefiniteError(ValueError):
    """Covariance matrix is indefinite beyond tolerance."""

    def __init__(self, message: str, min_eig: float):
        super().__init__(message)
        self.min_eig = min_eig


@dataclass(frozen=True)
class SpectralMoments:
    """Spectral moments and shape constants of a covariance model.

    ``lam4`` is ``inf`` for irregular models, in which case ``alpha`` is
    ``nan`` and ``C`` holds the coefficient of ``|t|^3/3!`` in r(t).
    """

    lam0: float
    lam2: float
    lam4: float
    C: float = 0.0

    @property
    def alpha(self) -> float:
        if not math.isfinite(self.lam4):
            return math.nan
        return self.lam2 / math.sqrt(self.lam0 * self.lam4)

    @property
    def regular(self) -> bool:
        return math.isfinite(self.lam4)


# ---------------------------------------------------------------------------
# kernels


class _Kernel:
    regular = True

    def deriv(self, t: np.ndarray, n: int) -> np.ndarray:  # pragma: no cover
        raise NotImplementedError

    def moments(self) -> SpectralMoments:  # pragma: no cover
        raise NotImplementedError

    def spectrum(self, w: np.ndarray) -> np.ndarray:
        raise NotImplementedError(f"{type(self).__name__} has no closed-form spectrum")


class _ExpPoly(_Kernel):
    """r(t) = exp(-|t|) p(|t|)."""

    def __init__(self, coef: Sequence[float], spectrum: Callable | None = None):
        self.coef = np.asarray(coef, dtype=float)
        self._spec = spectrum
        # q_n with r^(n)(t) = exp(-t) q_n(t) for t >= 0
        self._q = [self.coef]
        for _ in range(4):
            q = self._q[-1]
            self._q.append(npoly.polysub(npoly.polyder(q), q))
        q0 = [npoly.polyval(0.0, q) for q in self._q]
        self.C = float(q0[3])
        self.regular = abs(self.C) < 1e-14
        self._mom = SpectralMoments(
            lam0=float(q0[0]),
            lam2=float(-q0[2]),
            lam4=float(q0[4]) if self.regular else math.inf,
            C=0.0 if self.regular else self.C,
        )

    def deriv(self, t, n):
        t = np.asarray(t, dtype=float)
        if not self.regular and n >= 3 and np.any(t == 0):
            raise MomentUndefinedError(f"derivative of order {n} undefined at 0 for an irregular model")
        if n > 4:
            raise MomentUndefinedError("derivatives above order 4 are not provided")
        a = np.abs(t)
        val = np.exp(-a) * npoly.polyval(a, self._q[n])
        return val * np.sign(t) ** n if n % 2 else val

    def moments(self):
        return self._mom

    def spectrum(self, w):
        if self._spec is None:
            return super().spectrum(w)
        return self._spec(np.asarray(w, dtype=float))


def _exppoly_spectrum(coef: Sequence[float]) -> Callable:
    # one-sided transform of exp(-|t|) sum c_k |t|^k:
    # (2/pi) sum c_k k! Re[(1 + i w)^(k+1)] / (1 + w^2)^(k+1)
    coef = [float(c) for c in coef]

    def spec(w):
        w = np.asarray(w, dtype=float)
        z = 1.0 + 1j * w
        d = 1.0 + w * w
        out = np.zeros_like(w)
        for k, c in enumerate(coef):
            out = out + c * math.factorial(k) * (z ** (k + 1)).real / d ** (k + 1)
        return 2.0 / math.pi * out

    return spec


def _rational_spectrum(num_pow: int, den_pow: int, r0: float) -> Callable:
    # one-sided S1(w) = K w^num / (1+w^2)^den with int_0^inf S1 = r0
    a = num_pow / 2.0
    from scipy.special import beta

    mass = 0.5 * beta(a + 0.5, den_pow - a - 0.5)
    k = r0 / mass

    def spec(w):
        return k * w**num_pow / (1.0 + w * w) ** den_pow

    return spec


class _ShiftedGaussian(_Kernel):
    """r(t) = cos(k t) exp(-t^2/2)."""

    def __init__(self, k: float):
        self.k = float(k)

    def deriv(self, t, n):
        t = np.asarray(t, dtype=float)
        z = t - 1j * self.k
        # probabilists' Hermite polynomials at complex argument
        h_prev, h = np.ones_like(z), z
        if n == 0:
            h = h_prev
        else:
            for m in range(1, n):
                h_prev, h = h, z * h - m * h_prev
        val = (-1) ** n * h * np.exp(1j * self.k * t - 0.5 * t * t)
        return val.real

    def moments(self):
        k2 = self.k**2
        return SpectralMoments(1.0, 1.0 + k2, 3.0 + 6.0 * k2 + k2 * k2)

    def spectrum(self, w):
        w = np.asarray(w, dtype=float)
        # one-sided density; cosh factor combined with the Gaussian for stability
        g = np.exp(-0.5 * (w - self.k) ** 2) + np.exp(-0.5 * (w + self.k) ** 2)
        return g / math.sqrt(2.0 * math.pi)


class _Diffusion(_Kernel):
    """r(t) = sech(t/2)^(d/2)."""

    def __init__(self, d: int):
        self.d = int(d)
        q = self.d / 4.0
        self._P = [np.array([1.0])]
        one_minus_x2 = np.array([1.0, 0.0, -1.0])
        for _ in range(4):
            P = self._P[-1]
            nxt = npoly.polyadd(-q * npoly.polymulx(P), 0.5 * npoly.polymul(one_minus_x2, npoly.polyder(P)))
            self._P.append(np.atleast_1d(nxt))

    def deriv(self, t, n):
        t = np.asarray(t, dtype=float)
        th = np.tanh(0.5 * t)
        base = np.cosh(0.5 * np.minimum(np.abs(t), 1400.0)) ** (-self.d / 2.0)
        return base * npoly.polyval(th, self._P[n])

    def moments(self):
        p = [npoly.polyval(0.0, P) for P in self._P]
        return SpectralMoments(1.0, float(-p[2]), float(p[4]))

    def spectrum(self, w):
        from scipy.special import gammaln, loggamma

        # 2^a |Gamma(a/2 + i w)|^2 / (pi Gamma(a)) with a = d/2
        a = self.d / 2.0
        w = np.asarray(w, dtype=float)
        lg = 2.0 * loggamma(a / 2.0 + 1j * w).real
        return np.exp(a * math.log(2.0) + lg - gammaln(a)) / math.pi


class _Sinc(_Kernel):
    """r(t) = sin(t)/t, the flat spectrum on [-1, 1]."""

    _NSER = 16

    def deriv(self, t, n):
        t = np.asarray(t, dtype=float)
        out = np.empty_like(t)
        small = np.abs(t) < 1.0
        ts = t[small]
        acc = np.zeros_like(ts)
        for m in range(self._NSER):
            j = 2 * m
            if j < n:
                continue
            c = (-1) ** m / math.factorial(j + 1) * math.factorial(j) / math.factorial(j - n)
            acc += c * ts ** (j - n)
        out[small] = acc
        tb = t[~small]
        s, c = np.sin(tb), np.cos(tb)
        # d^n/dt^n sin(t)/t = sum_k C(n,k) sin^(n-k)(t) (-1)^k k! / t^(k+1)
        acc = np.zeros_like(tb)
        for k in range(n + 1):
            m = (n - k) % 4
            trig = (s, c, -s, -c)[m]
            acc += math.comb(n, k) * trig * (-1) ** k * math.factorial(k) / tb ** (k + 1)
        out[~small] = acc
        return out

    def moments(self):
        return SpectralMoments(1.0, 1.0 / 3.0, 1.0 / 5.0)

    def spectrum(self, w):
        w = np.asarray(w, dtype=float)
        return np.where(w <= 1.0, 1.0, 0.0)


@dataclass(frozen=True, eq=False)
class TabulatedSpectrum(_Kernel):
    """One-sided spectral density tabulated on an increasing grid starting at 0.

    Covariance derivatives are cosine transforms computed by the trapezoid
    rule on the tabulation grid.
    """

    omega: np.ndarray
    S: np.ndarray
    lam4_finite: bool = True

    def __post_init__(self):
        w = np.asarray(self.omega, dtype=float)
        s = np.asarray(self.S, dtype=float)
        if w.ndim != 1 or w.shape != s.shape or w.size < 3:
            raise ValueError("omega and S must be 1-D arrays of equal length >= 3")
        if np.any(np.diff(w) <= 0) or w[0] < 0:
            raise ValueError("omega must be increasing and nonnegative")
        if np.any(s < 0):
            raise ValueError("spectral density must be nonnegative")
        wt = np.empty_like(w)
        dw = np.diff(w)
        wt[0], wt[-1] = dw[0] / 2, dw[-1] / 2
        wt[1:-1] = (dw[:-1] + dw[1:]) / 2
        object.__setattr__(self, "omega", w)
        object.__setattr__(self, "S", s)
        object.__setattr__(self, "_wS", wt * s)

    @property
    def dw_max(self) -> float:
        return float(np.max(np.diff(self.omega)))

    def deriv(self, t, n):
        t = np.asarray(t, dtype=float)
        flat = t.ravel()
        if n == 4 and not self.lam4_finite:
            raise MomentUndefinedError("fourth spectral moment diverges for this spectrum")
        wn = self._wS * self.omega**n
        out = np.empty_like(flat)
        step = max(1, 2_000_000 // self.omega.size)
        for i in range(0, flat.size, step):
            ph = np.outer(flat[i : i + step], self.omega) + n * np.pi / 2
            out[i : i + step] = np.cos(ph) @ wn
        return out.reshape(t.shape)

    def moments(self):
        lam = [float(np.sum(self._wS * self.omega**k)) for k in (0, 2, 4)]
        lam4 = lam[2] if self.lam4_finite else math.inf
        return SpectralMoments(lam[0], lam[1], lam4)

    def spectrum(self, w):
        return np.interp(w, self.omega, self.S, right=0.0)


class _ClosedForm(_Kernel):
    """User-supplied covariance with analytic derivative callables."""

    def __init__(self, funcs: Sequence[Callable], moments: SpectralMoments | None = None):
        self.funcs = list(funcs)
        self._mom = moments

    def deriv(self, t, n):
        if n >= len(self.funcs) or self.funcs[n] is None:
            raise MomentUndefinedError(f"derivative of order {n} not supplied")
        return np.asarray(self.funcs[n](np.asarray(t, dtype=float)), dtype=float)

    def moments(self):
        if self._mom is not None:
            return self._mom
        lam0 = float(self.deriv(0.0, 0))
        lam2 = float(-self.deriv(0.0, 2))
        try:
            lam4 = float(self.deriv(0.0, 4))
        except MomentUndefinedError:
            lam4 = math.inf
        return SpectralMoments(lam0, lam2, lam4)


def _uniform_spectrum(fn: Callable, w_max: float, n: int = 2**14 + 1, floor: float = 1e-12) -> TabulatedSpectrum:
    w = np.linspace(0.0, w_max, n)
    s = fn(w)
    keep = np.nonzero(s >= floor * s.max())[0]
    last = min(int(keep[-1]) + 2, n)
    return TabulatedSpectrum(w[:last], s[:last])


def butterworth_spectrum(order: int = 14) -> TabulatedSpectrum:
    """Two-sided density (1 + w^order)^-1, tabulated one-sided up to the 1e-12 cutoff."""
    w_max = (1e12) ** (1.0 / order) * 1.05
    return _uniform_spectrum(lambda w: 2.0 / (1.0 + w**order), w_max)


def jonswap_spectrum(
    peak_period: float = 2 * math.pi,
    gamma: float = 3.3,
    sigma_a: float = 0.07,
    sigma_b: float = 0.09,
    cutoff: float = 5.25,
) -> TabulatedSpectrum:
    """Jonswap wave spectrum truncated at ``cutoff`` times the peak frequency.

    The overall level is irrelevant after normalization and set to one. The
    untruncated density decays like w^-5 so its fourth moment diverges; the
    cutoff makes the model regular.
    """
    wp = 2 * math.pi / peak_period

    def fn(w):
        out = np.zeros_like(w)
        pos = w > 0.05 * wp
        wq = w[pos]
        sig = np.where(wq <= wp, sigma_a, sigma_b)
        peak = np.exp(-((wq - wp) ** 2) / (2 * sig**2 * wp**2))
        out[pos] = wq**-5 * np.exp(-1.25 * (wp / wq) ** 4) * gamma**peak
        return out

    w = np.linspace(0.0, cutoff * wp, 2**14 + 1)
    return TabulatedSpectrum(w, fn(w))


# ---------------------------------------------------------------------------
# model


@dataclass(frozen=True, eq=False)
class CovarianceModel:
    """Stationary covariance ``r(t) = kernel(scale * t) / amplitude``."""

    kernel: _Kernel
    name: str = "custom"
    scale: float = 1.0
    amplitude: float = 1.0

    def __post_init__(self):
        if not (self.scale > 0 and self.amplitude > 0):
            raise ValueError("scale and amplitude must be positive")

    def deriv(self, t, n: int = 0):
        """n-th derivative of r at t (array-valued)."""
        t = np.asarray(t, dtype=float)
        return self.scale**n * self.kernel.deriv(self.scale * t, n) / self.amplitude

    def __call__(self, t):
        return self.deriv(t, 0)

    @property
    def regular(self) -> bool:
        return self.kernel.regular

    def moments(self) -> SpectralMoments:
        m = self.kernel.moments()
        c, a = self.scale, self.amplitude
        return SpectralMoments(m.lam0 / a, c**2 * m.lam2 / a, c**4 * m.lam4 / a, c**3 * m.C / a)

    def spectrum(self, w):
        """One-sided spectral density of the scaled model."""
        w = np.asarray(w, dtype=float)
        return self.kernel.spectrum(w / self.scale) / (self.scale * self.amplitude)

    @property
    def crossing_rate(self) -> float:
        """Mean number of upcrossings of the mean level per unit time."""
        m = self.moments()
        return math.sqrt(m.lam2 / m.lam0) / (2 * math.pi)

    @property
    def mean_interval(self) -> float:
        """Mean length of a zero-crossing interval, 1/(2 nu)."""
        return 0.5 / self.crossing_rate


_LH = {
    1: ([1, 1, 1 / 3], (0, 3)),
    2: ([1, 1, 6 / 15, 1 / 15], (0, 4)),
    3: ([1, 1, 3 / 7, 2 / 21, 1 / 105], (0, 5)),
    4: ([1, 1, -1 / 3, -2 / 3, 1 / 9], (4, 5)),
    5: ([1, 1], (0, 2)),
    6: ([1, 1, -1 / 3], None),
    7: ([1, 1, -2, 1 / 3], (4, 4)),
}


def catalog_codes() -> list[str]:
    """Codes of the built-in catalog (WH and BMS families shown at their common members)."""
    return (
        [f"LH{k}" for k in range(1, 8)]
        + [f"WH{k}" for k in range(10)]
        + ["WN", "BS", "J"]
        + [f"BMS{d}" for d in (1, 2, 3, 10)]
    )


def get_model(code: str, normalized: bool = False, **params) -> CovarianceModel:
    """Build a catalog model from its code (``LH1``..``LH7``, ``WHk``, ``BMSd``, ``WN``, ``BS``, ``J``).

    Keyword parameters are forwarded to the Jonswap constructor for ``J``.
    """
    code = code.strip().upper()
    m = re.fullmatch(r"(LH|WH|BMS)(\d+)", code)
    if m:
        fam, k = m.group(1), int(m.group(2))
        if fam == "LH":
            if k not in _LH:
                raise KeyError(f"unknown model code {code!r}")
            coef, shape = _LH[k]
            # the tabulated rational form of LH6 does not match its covariance
            spec = _exppoly_spectrum(coef) if shape is None else _rational_spectrum(*shape, 1.0)
            kern = _ExpPoly(coef, spec)
        elif fam == "WH":
            kern = _ShiftedGaussian(k)
        else:
            if k < 1:
                raise KeyError(f"unknown model code {code!r}")
            kern = _Diffusion(k)
    elif code == "WN":
        kern = _Sinc()
    elif code == "BS":
        kern = butterworth_spectrum(14)
    elif code == "J":
        kern = jonswap_spectrum(**params)
    else:
        raise KeyError(f"unknown model code {code!r}")
    model = CovarianceModel(kern, name=code)
    return normalize(model) if normalized else model


def model_from_spectrum(omega, S, name: str = "tabulated") -> CovarianceModel:
    """Model from a one-sided tabulated spectrum."""
    return CovarianceModel(TabulatedSpectrum(np.asarray(omega), np.asarray(S)), name=name)


def model_from_callables(funcs: Sequence[Callable], name: str = "closed-form") -> CovarianceModel:
    """Model from callables ``[r, r', r'', r''', r'''']`` (trailing ones may be omitted)."""
    return CovarianceModel(_ClosedForm(funcs), name=name)


def read_spectrum_csv(path) -> CovarianceModel:
    """Read a two-column (omega, S) CSV holding a one-sided spectral density."""
    rows = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].lstrip().startswith("#"):
                continue
            try:
                rows.append((float(row[0]), float(row[1])))
            except ValueError:
                continue  # header line
    if len(rows) < 2:
        raise ValueError(f"{path}: fewer than two (omega, S) rows")
    arr = np.asarray(rows)
    return model_from_spectrum(arr[:, 0], arr[:, 1], name=str(path))


def eval_cov(model: CovarianceModel, t):
    return model.deriv(t, 0)


def eval_cov_d1(model: CovarianceModel, t):
    return model.deriv(t, 1)


def eval_cov_d2(model: CovarianceModel, t):
    return model.deriv(t, 2)


def eval_cov_d4(model: CovarianceModel, t=0.0):
    return model.deriv(t, 4)


def spectral_moments(model: CovarianceModel) -> SpectralMoments:
    return model.moments()


def normalize(model: CovarianceModel) -> CovarianceModel:
    """Rescale time and amplitude so that lambda0 = lambda2 = 1."""
    m = model.moments()
    if not m.lam2 > 0 or not math.isfinite(m.lam2):
        raise ValueError("lambda2 must be finite and positive to normalize")
    c = math.sqrt(m.lam0 / m.lam2)
    if abs(c - 1.0) < 1e-14 and abs(m.lam0 - 1.0) < 1e-14:
        return model
    return replace(model, scale=model.scale * c, amplitude=model.amplitude * m.lam0)


def spectrum_to_cov(spectrum: TabulatedSpectrum, t_grid, richardson_tol: float = 1e-6) -> np.ndarray:
    """Covariance at ``t_grid`` by trapezoid cosine transform of a one-sided spectrum.

    Raises
    ------
    AliasingError
        If the spectral step cannot resolve the largest lag (dw * t_max > pi).
    """
    t = np.asarray(t_grid, dtype=float)
    tmax = float(np.max(np.abs(t))) if t.size else 0.0
    if spectrum.dw_max * tmax > np.pi:
        raise AliasingError(f"dw*t_max = {spectrum.dw_max * tmax:.3g} exceeds pi")
    r = spectrum.deriv(t, 0)
    w = spectrum.omega
    if w.size >= 5 and w.size % 2 == 1:
        coarse = TabulatedSpectrum(w[::2], spectrum.S[::2])
        diff = np.max(np.abs(coarse.deriv(t, 0) - r)) / 3.0
        if diff > richardson_tol * abs(float(spectrum.deriv(0.0, 0))):
            log.warning("cosine-transform Richardson estimate %.2e exceeds tolerance", diff)
    return r


# ---------------------------------------------------------------------------
# block covariance


@dataclass(frozen=True)
class GridSpec:
    """Uniform time grid: density arguments t = k*dt, k = 0..n_left (first axis) and 0..n_right."""

    dt: float
    n_left: int
    n_right: int
    max_dim: int = 400

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.n_left < 1 or self.n_right < 1:
            raise ValueError("grid needs at least one step on each side")


def _steps(t: float, dt: float) -> int:
    k = int(round(t / dt))
    if k < 0 or abs(k * dt - t) > 1e-9 * max(1.0, abs(t)):
        raise ValueError(f"t={t} is not a multiple of dt={dt}")
    return k


@dataclass(frozen=True, eq=False)
class BlockCovariance:
    """Covariance of the stacked vector [Xt; Xd; Xc].

    ``Xt`` are process values at interior grid points, ``Xd`` derivatives at
    the crossing epochs and ``Xc`` values at the crossing epochs. The process
    is kept centred (``mean`` is zero); the level enters through bounds and
    conditioning values, see ``level``.
    """

    cov: np.ndarray
    mean: np.ndarray
    labels: tuple[str, ...]
    n_t: int
    n_d: int
    n_c: int
    times_t: np.ndarray
    times_c: np.ndarray
    level: float = 0.0

    @property
    def slices(self):
        a, b = self.n_t, self.n_t + self.n_d
        return slice(0, a), slice(a, b), slice(b, b + self.n_c)


def lag_table(model: CovarianceModel, n_max: int, dt: float) -> dict[int, np.ndarray]:
    """r, r', r'' at lags k*dt for k = -n_max..n_max (index k + n_max)."""
    lags = dt * np.arange(-n_max, n_max + 1)
    return {n: model.deriv(lags, n) for n in (0, 1, 2)}


def stacked_covariance(model: CovarianceModel, times_v, times_d) -> np.ndarray:
    """Covariance of (X(times_v), X'(times_d)) for arbitrary time points.

    Uses Cov(X(a), X(b)) = r(b-a), Cov(X(a), X'(b)) = r'(b-a),
    Cov(X'(a), X'(b)) = -r''(b-a).
    """
    tv = np.asarray(times_v, dtype=float)
    td = np.asarray(times_d, dtype=float)
    vv = model.deriv(tv[None, :] - tv[:, None], 0)
    vd = model.deriv(td[None, :] - tv[:, None], 1)
    dd = -model.deriv(td[None, :] - td[:, None], 2)
    top = np.hstack([vv, vd])
    bot = np.hstack([vd.T, dd])
    out = np.vstack([top, bot])
    return 0.5 * (out + out.T)


def build_block_covariance(
    model: CovarianceModel,
    grid: GridSpec,
    t1: float,
    t2: float,
    u: float = 0.0,
    ridge: float = 1e-7,
    check: bool = True,
) -> BlockCovariance:
    """Block covariance for two adjacent intervals (-t1, 0) and (0, t2).

    Variables are ordered as interior values on (-t1, 0) then (0, t2), the
    derivatives at -t1, 0, t2 and the values at -t1, 0, t2.
    """
    k1, k2 = _steps(t1, grid.dt), _steps(t2, grid.dt)
    tt = np.concatenate([grid.dt * np.arange(-k1 + 1, 0), grid.dt * np.arange(1, k2)])
    tc = np.array([-k1 * grid.dt, 0.0, k2 * grid.dt])
    nt = tt.size
    if nt + 6 > grid.max_dim:
        raise ValueError(f"dimension {nt + 6} exceeds max_dim={grid.max_dim}")
    full = stacked_covariance(model, np.concatenate([tt, tc]), tc)
    # reorder (values..., crossing values, derivatives) to (Xt, Xd, Xc)
    order = np.concatenate([np.arange(nt), nt + 3 + np.arange(3), nt + np.arange(3)])
    cov = full[np.ix_(order, order)] + ridge * np.eye(nt + 6)
    if check:
        ev = float(np.linalg.eigvalsh(cov)[0])
        if ev < -1e-8:
            raise NotPositiveDefiniteError(f"minimum eigenvalue {ev:.3e} after ridge", ev)
    labels = tuple([f"X({x:.6g})" for x in tt] + [f"dX({x:.6g})" for x in tc] + [f"X({x:.6g})" for x in tc])
    return BlockCovariance(cov, np.zeros(nt + 6), labels, nt, 3, 3, tt, tc, float(u))
