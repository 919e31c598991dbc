"""Simulation oracle: exact stationary Gaussian paths and empirical interval statistics.

Paths are generated by circulant embedding of the covariance on a regular
grid.  Level crossings are located by linear interpolation between grid
points, which gives interval lengths below the grid resolution.

Binary interval files hold consecutive little-endian float64 triples
``(start_time, length, side)`` with side +1 for intervals above the level
and -1 below.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .covmodel import CovarianceModel
from .crossings import Density1D, JointDensity2D, PersistenceCurve

__all__ = [
    "SimulatedPaths",
    "IntervalSequence",
    "simulate_paths",
    "extract_intervals",
    "empirical_joint",
    "bin_average",
    "empirical_density",
    "empirical_persistence",
    "empirical_delays",
    "write_intervals",
    "read_intervals",
    "EMBED_TOL",
]

EMBED_TOL = 1e-9
_RECORD = np.dtype("<f8")


@dataclass
class SimulatedPaths:
    """Array ``x`` of shape (n_paths, n_points) with step ``dt`` and embedding metadata."""

    x: np.ndarray
    dt: float
    meta: dict = field(default_factory=dict)


def _embedding(model: CovarianceModel, n_points: int, dt: float, max_size: int):
    m = 1 << max(1, math.ceil(math.log2(2 * (n_points - 1))))
    while True:
        lags = dt * np.arange(m // 2 + 1)
        r = np.asarray(model(lags), dtype=float)
        c = np.concatenate([r, r[-2:0:-1]])
        lam = np.fft.rfft(c).real
        if lam.min() >= -EMBED_TOL or 2 * m > max_size:
            break
        m *= 2
    if lam.min() < -EMBED_TOL:
        raise ValueError(
            f"circulant embedding not nonnegative (min eigenvalue {lam.min():.3g}) at size {m}; "
            "use a spectral simulation method for this model")
    return m, lam


def simulate_paths(model: CovarianceModel, n_points: int, dt: float = 0.05, n_paths: int = 1,
                   seed: int = 0, max_size: int = 1 << 24) -> SimulatedPaths:
    """Stationary Gaussian paths by circulant embedding.

    Path i is drawn from a generator seeded by (seed, i), so results do not
    depend on how many paths are requested together.
    """
    if n_points < 2:
        raise ValueError("n_points must be at least 2")
    m, lam = _embedding(model, n_points, dt, max_size)
    clipped = float(-lam[lam < 0].sum()) if np.any(lam < 0) else 0.0
    scale = np.sqrt(np.clip(lam, 0, None) / m)
    out = np.empty((n_paths, n_points))
    for i in range(n_paths):
        rng = np.random.default_rng([seed, i])
        z = rng.standard_normal(m)
        # real FFT of white noise reproduces the circulant covariance exactly
        w = np.fft.rfft(z)
        out[i] = np.fft.irfft(w * scale * math.sqrt(m), n=m)[:n_points]
    return SimulatedPaths(out, dt, {"embedding_size": m, "min_eigenvalue": float(lam.min()),
                                    "clipped": clipped, "clip_tol": EMBED_TOL, "seed": seed})


@dataclass
class IntervalSequence:
    """Alternating intervals between successive crossings of level u."""

    start: np.ndarray
    length: np.ndarray
    side: np.ndarray
    level: float = 0.0
    no_crossings: bool = False

    def __len__(self) -> int:
        return int(self.length.size)

    def pairs(self, first: str = "below"):
        """Consecutive pairs (T_k, T_k+1) whose first member lies on side ``first``."""
        s = +1 if first == "above" else -1
        contiguous = np.isclose(self.start[:-1] + self.length[:-1], self.start[1:])
        k = np.nonzero((self.side[:-1] == s) & contiguous)[0]
        return self.length[k], self.length[k + 1]

    @staticmethod
    def concat(seqs) -> "IntervalSequence":
        seqs = list(seqs)
        off, starts = 0.0, []
        for s in seqs:
            # separate paths so that pairs never straddle two of them
            starts.append(s.start + off + 1.0)
            off = starts[-1][-1] + s.length[-1] + 1.0 if len(s) else off + 1.0
        return IntervalSequence(np.concatenate(starts) if starts else np.zeros(0),
                                np.concatenate([s.length for s in seqs]) if seqs else np.zeros(0),
                                np.concatenate([s.side for s in seqs]) if seqs else np.zeros(0, int),
                                seqs[0].level if seqs else 0.0)


def _crossing_times(x: np.ndarray, dt: float, u: float):
    y = x - u
    pos = y >= 0
    idx = np.nonzero(pos[1:] != pos[:-1])[0]
    frac = y[idx] / (y[idx] - y[idx + 1])
    return (idx + frac) * dt, np.where(pos[idx + 1], 1, -1)


def extract_intervals(path, dt: float, u: float = 0.0) -> IntervalSequence:
    """Intervals between crossings of u, with partial intervals at both ends discarded."""
    x = np.asarray(path, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("path must be finite")
    tc, side = _crossing_times(x, dt, u)
    if tc.size < 2:
        return IntervalSequence(np.zeros(0), np.zeros(0), np.zeros(0, int), u, no_crossings=True)
    return IntervalSequence(tc[:-1], np.diff(tc), side[:-1].astype(int), u)


def _bin_edges(t: np.ndarray) -> np.ndarray:
    mid = 0.5 * (t[1:] + t[:-1])
    return np.concatenate([[t[0]], mid, [t[-1]]])


def empirical_density(lengths, t_grid) -> Density1D:
    """Histogram density on bins centred at the grid points (half bins at the ends)."""
    t = np.asarray(t_grid, dtype=float)
    lengths = np.asarray(lengths, dtype=float)
    edges = _bin_edges(t)
    counts, _ = np.histogram(lengths, edges)
    w = np.diff(edges)
    n = max(lengths.size, 1)
    return Density1D(t, counts / (n * w), 3 * np.sqrt(counts) / (n * w), "empirical")


def empirical_joint(intervals: IntervalSequence, t_grid, first: str = "below") -> JointDensity2D:
    """2D histogram of consecutive pairs, normalized by the total number of pairs.

    Bins are centred on ``t_grid`` with half bins at both ends so that the
    trapezoid integral equals the fraction of pairs inside the grid.
    ``err`` holds three Poisson standard deviations per cell.
    """
    t = np.asarray(t_grid, dtype=float)
    a, b = intervals.pairs(first)
    if a.size < 10_000:
        warnings.warn(f"only {a.size} pairs; histogram will be noisy")
    edges = _bin_edges(t)
    counts, _, _ = np.histogram2d(a, b, [edges, edges])
    area = np.outer(np.diff(edges), np.diff(edges))
    n = max(a.size, 1)
    f = counts / (n * area)
    err = 3 * np.sqrt(counts) / (n * area)
    return JointDensity2D(t, t.copy(), f, err, np.zeros_like(f), level=intervals.level,
                          meta={"pairs": int(a.size), "first": first, "counts": counts})


def _simpson_bin_matrix(n_fine: int) -> np.ndarray:
    """Weights mapping a fine grid (step h) to averages over bins of width 2h.

    Interior bins centred on even fine points use Simpson's rule on the three
    points spanning the bin; the half bins at both ends use the trapezoid rule.
    """
    if n_fine % 2 == 0 or n_fine < 3:
        raise ValueError("the fine grid needs an odd number of points, at least three")
    nc = (n_fine + 1) // 2
    A = np.zeros((nc, n_fine))
    A[0, :2] = 0.5
    A[-1, -2:] = 0.5
    for c in range(1, nc - 1):
        A[c, 2 * c - 1:2 * c + 2] = np.array([1, 4, 1]) / 6
    return A


def bin_average(joint: JointDensity2D) -> JointDensity2D:
    """Average a gridded joint density over the histogram bins of every second grid point.

    A histogram estimates the bin average of the density, which differs from
    its value at the bin centre by a term of order (bin width)^2 times the
    curvature.  Near a sharp peak this bias exceeds the sampling error of
    1e5 pairs, so the analytic density is computed on a grid twice as fine
    and averaged here before comparison.
    """
    A1, A2 = _simpson_bin_matrix(joint.t1.size), _simpson_bin_matrix(joint.t2.size)
    avg = lambda g: A1 @ g @ A2.T
    return JointDensity2D(joint.t1[::2], joint.t2[::2], avg(joint.f), avg(joint.err), avg(joint.terr),
                          level=joint.level, runtime=joint.runtime, meta={**joint.meta, "bin_average": True})


def empirical_persistence(paths, T_grid, u: float = 0.0, dt: float | None = None,
                          stride: int | None = None) -> PersistenceCurve:
    """Fraction of windows [s, s+T] on which the sampled path stays on one side of u.

    Windows start every ``stride`` samples (default: the largest T) so that
    they are nearly independent.
    """
    x = paths.x if isinstance(paths, SimulatedPaths) else np.atleast_2d(np.asarray(paths, dtype=float))
    dt = paths.dt if isinstance(paths, SimulatedPaths) else dt
    if dt is None:
        raise ValueError("dt is required for raw arrays")
    T = np.asarray(T_grid, dtype=float)
    k = np.rint(T / dt).astype(int)
    stride = stride or max(1, int(k.max()))
    runs = []
    for row in x:
        above = row >= u
        change = np.nonzero(above[1:] != above[:-1])[0] + 1  # first sample on the new side
        starts = np.arange(0, row.size - k.max(), stride)
        if starts.size == 0:
            continue
        nxt = np.searchsorted(change, starts, side="right")
        first = np.where(nxt < change.size, change[np.minimum(nxt, change.size - 1)], row.size)
        run = first - starts - 1  # samples after the start still on the same side
        runs.append(np.mean(run[:, None] >= k[None, :], axis=0))
    runs = np.array(runs)
    Q = runs.mean(axis=0)
    nw = runs.shape[0] * max(1, (x.shape[1] - int(k.max())) // stride)
    Q_err = 3 * np.sqrt(np.clip(Q * (1 - Q), 0, None) / max(nw, 1))
    return PersistenceCurve(T, Q, Q_err, runs, dt, level=u)


def empirical_delays(intervals: IntervalSequence, n_origins: int, seed: int = 0):
    """Forward and backward delays (A, B) from uniformly placed origins."""
    rng = np.random.default_rng(seed)
    starts = intervals.start
    ends = starts + intervals.length
    origins = rng.uniform(starts[0], ends[-1], n_origins)
    k = np.searchsorted(starts, origins, side="right") - 1
    inside = origins < ends[k]
    k, o = k[inside], origins[inside]
    return ends[k] - o, o - starts[k]


def write_intervals(path, seq: IntervalSequence, append: bool = False) -> None:
    rec = np.column_stack([seq.start, seq.length, seq.side.astype(float)]).astype(_RECORD)
    with open(path, "ab" if append else "wb") as fh:
        fh.write(rec.tobytes())


def read_intervals(path, level: float = 0.0) -> IntervalSequence:
    data = np.fromfile(path, dtype=_RECORD)
    if data.size % 3:
        raise ValueError("truncated interval file")
    data = data.reshape(-1, 3)
    return IntervalSequence(data[:, 0], data[:, 1], data[:, 2].astype(int), level)
