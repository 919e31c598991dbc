"""Rank-1 lattice rules built by fast component-by-component search."""
from __future__ import annotations

from functools import lru_cache

import numpy as np

# primes close to powers of two
PRIMES = (31, 61, 127, 251, 509, 1021, 2039, 4093, 8191, 16381, 32749, 65521)


def prime_at_least(n: int) -> int:
    for p in PRIMES:
        if p >= n:
            return p
    return PRIMES[-1]


def _primitive_root(n: int) -> int:
    phi = n - 1
    factors, m, f = set(), phi, 2
    while f * f <= m:
        while m % f == 0:
            factors.add(f)
            m //= f
        f += 1
    if m > 1:
        factors.add(m)
    for g in range(2, n):
        if all(pow(g, phi // q, n) != 1 for q in factors):
            return g
    raise ValueError("no primitive root")


@lru_cache(maxsize=32)
def generating_vector(n: int, dim: int) -> np.ndarray:
    """Generating vector for an n-point lattice in ``dim`` dimensions.

    Fast CBC construction (circulant structure of the multiplicative group
    mod n) minimizing the worst-case error in the Korobov space of
    smoothness 2 with product weights 1/j^2.
    """
    if n not in PRIMES:
        raise ValueError("lattice size must be one of the tabulated primes")
    g = _primitive_root(n)
    m = n - 1
    perm = np.empty(m, dtype=np.int64)
    perm[0] = 1
    for j in range(1, m):
        perm[j] = perm[j - 1] * g % n
    x = perm / n
    omega = 2 * np.pi**2 * (x * x - x + 1.0 / 6.0)
    f_omega = np.fft.fft(omega)
    # p[b] holds the running product at point k = g^b (k = 0 is the same for all candidates)
    p = np.ones(m)
    z = np.empty(dim, dtype=np.int64)
    for j in range(dim):
        gamma = 1.0 / (j + 1) ** 2
        # S[a] = sum_b p[b] omega[(a + b) mod m] : circular cross-correlation
        s = np.fft.ifft(np.conj(np.fft.fft(p)) * f_omega).real
        a = int(np.argmin(s)) if j else 0
        z[j] = perm[a]
        p *= 1.0 + gamma * np.roll(omega, -a)
    return z


def lattice_points(n: int, z: np.ndarray, shift: np.ndarray) -> np.ndarray:
    """Shifted lattice with the tent periodization, shape (len(z), n)."""
    k = np.arange(n, dtype=np.int64)
    x = (np.outer(z, k) % n) / n + shift[:, None]
    x -= np.floor(x)
    return 1.0 - np.abs(2.0 * x - 1.0)
