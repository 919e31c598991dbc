"""Random low-dimensional Gaussian problems with independently computed truth.

Probability problems use scipy's multivariate normal cdf at tight
tolerances.  Weighted problems are conditioned with dense linear algebra and
integrated by nested adaptive quadrature.
"""
import numpy as np
from scipy import integrate
from scipy.special import ndtr
from scipy.stats import multivariate_normal

from levelcross.mvnexp import MvnProblem

ROUNDING_FLOOR = 1e-12

# frozen brute-force oracles from tests/oracles/mc_oracles.py (value, 3 sigma)
ORTHANT_100D = (0.0126054, 1.0583880905299341e-04)
WEIGHTED_CELL = (7.513724270161107e-04, 2.5002621656709406e-06)


def random_cov(rng, d):
    A = rng.normal(size=(d, d + 1))
    S = A @ A.T
    s = np.sqrt(np.diag(S))
    v = rng.uniform(0.7, 1.4, d)
    return S / np.outer(s, s) * np.outer(v, v)


def random_bounds(rng, d):
    lo = np.where(rng.random(d) < 0.3, -np.inf, rng.normal(-0.5, 1, d))
    hi = np.where(rng.random(d) < 0.3, np.inf,
                  np.where(np.isinf(lo), rng.normal(0.5, 1, d), lo + rng.exponential(1.5, d)))
    return lo, hi


def probability_case(rng):
    d = int(rng.integers(1, 6))
    S = random_cov(rng, d)
    m = rng.normal(0, 0.5, d)
    lo, hi = random_bounds(rng, d)
    return MvnProblem(S, m, lo, hi), probability_truth(S, m, lo, hi)


def probability_truth(S, m, lo, hi):
    if len(m) == 1:
        s = np.sqrt(S[0, 0])
        return float(ndtr((hi[0] - m[0]) / s) - ndtr((lo[0] - m[0]) / s))
    return float(multivariate_normal.cdf(hi, m, S, lower_limit=lo, maxpts=200_000 * len(m),
                                         abseps=1e-10, releps=0))


def _weight(x, sign):
    return np.maximum(x, 0) if sign == "+" else (np.maximum(-x, 0) if sign == "-" else np.abs(x))


def _box_prob(m, S, lo, hi):
    """P(lo <= Y <= hi) for Y ~ N(m, S) in at most two dimensions, by quadrature."""
    k = len(m)
    if k == 0:
        return 1.0
    s0 = np.sqrt(S[0, 0])
    if k == 1:
        return float(ndtr((hi[0] - m[0]) / s0) - ndtr((lo[0] - m[0]) / s0))
    b = S[1, 0] / S[0, 0]
    s1 = np.sqrt(max(S[1, 1] - b * S[1, 0], 0.0))

    def inner(y):
        c = m[1] + b * (y - m[0])
        dens = np.exp(-0.5 * ((y - m[0]) / s0) ** 2) / (s0 * np.sqrt(2 * np.pi))
        return dens * (ndtr((hi[1] - c) / s1) - ndtr((lo[1] - c) / s1))

    a, z = max(lo[0], m[0] - 12 * s0), min(hi[0], m[0] + 12 * s0)
    if a >= z:
        return 0.0
    return integrate.quad(inner, a, z, epsabs=1e-14, epsrel=1e-12, limit=200)[0]


def weighted_case(rng):
    """One weight variable, up to two indicators and up to two conditioning values."""
    n_ind = int(rng.integers(0, 3))
    n_cond = int(rng.integers(0, 3))
    d = 1 + n_ind + n_cond
    S = random_cov(rng, d)
    m = rng.normal(0, 0.5, d)
    lo, hi = random_bounds(rng, d)
    lo[0], hi[0] = -np.inf, np.inf  # the weight carries only its sign constraint
    sign = ["+", "-", "abs"][int(rng.integers(0, 3))]
    cond = tuple(range(1 + n_ind, d))
    cval = tuple(rng.normal(0, 0.8, n_cond))
    prob = MvnProblem(S, m, lo, hi, weights=((0, sign),), cond_index=cond, cond_value=cval)
    return prob, weighted_truth(S, m, lo, hi, sign, n_ind, cond, cval)


def weighted_truth(S, m, lo, hi, sign, n_ind, cond, cval):
    keep = list(range(1 + n_ind))
    c = list(cond)
    factor = 1.0
    if c:
        Scc = S[np.ix_(c, c)]
        Skc = S[np.ix_(keep, c)]
        dev = np.asarray(cval) - m[c]
        m = m[keep] + Skc @ np.linalg.solve(Scc, dev)
        S = S[np.ix_(keep, keep)] - Skc @ np.linalg.solve(Scc, Skc.T)
        factor = float(np.exp(-0.5 * dev @ np.linalg.solve(Scc, dev)) / np.sqrt(np.linalg.det(2 * np.pi * Scc)))
    s0 = np.sqrt(S[0, 0])
    b = S[1:, 0] / S[0, 0]
    Sy = S[1:, 1:] - np.outer(b, S[1:, 0])

    def f(x):
        dens = np.exp(-0.5 * ((x - m[0]) / s0) ** 2) / (s0 * np.sqrt(2 * np.pi))
        return _weight(x, sign) * dens * _box_prob(m[1:] + b * (x - m[0]), Sy, lo[1:], hi[1:])

    a, z = m[0] - 12 * s0, m[0] + 12 * s0
    pts = [0.0] if a < 0 < z else None
    val = integrate.quad(f, a, z, points=pts, epsabs=1e-14, epsrel=1e-11, limit=200)[0]
    return factor * val


def covered(result, truth):
    return abs(result.value - truth) <= result.sampling_error + result.truncation_error + ROUNDING_FLOOR
