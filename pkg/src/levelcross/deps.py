"""Dependence between successive crossing intervals and a Markov-chain test."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

__all__ = [
    "MarkovModel",
    "MarkovTestResult",
    "interval_correlation",
    "kl_distance",
    "markov_transition",
    "markov_chain_3d",
    "markov_test",
]


def _grid_weights(t: np.ndarray) -> np.ndarray:
    """Trapezoid weights of a (possibly nonuniform) grid."""
    w = np.zeros_like(t, dtype=float)
    d = np.diff(t)
    w[:-1] += d / 2
    w[1:] += d / 2
    return w


def interval_correlation(f) -> float:
    """Pearson correlation of (T1, T2) from the gridded joint density.

    Moments are trapezoid integrals normalized by the total mass.
    """
    t1, t2, F = np.asarray(f.t1), np.asarray(f.t2), np.asarray(f.f)
    w1, w2 = _grid_weights(t1), _grid_weights(t2)
    W = F * np.outer(w1, w2)
    mass = W.sum()
    if not mass > 0:
        raise ValueError("density has no mass")
    m1 = W.sum(axis=1) @ t1 / mass
    m2 = W.sum(axis=0) @ t2 / mass
    v1 = W.sum(axis=1) @ (t1 - m1) ** 2 / mass
    v2 = W.sum(axis=0) @ (t2 - m2) ** 2 / mass
    if v1 <= 0 or v2 <= 0:
        raise ValueError("degenerate marginal variance")
    c = (t1 - m1) @ W @ (t2 - m2) / mass
    return float(np.clip(c / np.sqrt(v1 * v2), -1.0, 1.0))


def kl_distance(f) -> float:
    """Kullback-Leibler distance of the joint density from the product of its marginals.

    Both densities are renormalized to unit mass with trapezoid weights and
    floored at machine epsilon times max f.
    """
    t1, t2, F = np.asarray(f.t1), np.asarray(f.t2), np.clip(np.asarray(f.f, dtype=float), 0, None)
    W = np.outer(_grid_weights(t1), _grid_weights(t2))
    mass = (F * W).sum()
    if not mass > 0:
        raise ValueError("density has no mass")
    F = F / mass
    m1 = (F * W).sum(axis=1) / _safe(_grid_weights(t1))
    m2 = (F * W).sum(axis=0) / _safe(_grid_weights(t2))
    G = np.outer(m1, m2)
    G = G / (G * W).sum()
    eps = np.finfo(float).eps * F.max()
    Fe, Ge = F + eps, G + eps
    Fe, Ge = Fe / (Fe * W).sum(), Ge / (Ge * W).sum()
    return float(max(0.0, (W * Fe * np.log(Fe / Ge)).sum()))


def _safe(w):
    return np.where(w > 0, w, 1.0)


@dataclass
class MarkovModel:
    """Row-stochastic transition matrix between interval-length bins.

    ``states`` are the bin centres that survived; ``dropped`` lists the
    indices of conditioning bins without mass.
    """

    states: np.ndarray
    P: np.ndarray
    marginal: np.ndarray
    dropped: tuple = ()


def markov_transition(f) -> MarkovModel:
    """P(T2 = x_k | T1 = x_j) from the discretized joint density (cell masses)."""
    t1, t2, F = np.asarray(f.t1), np.asarray(f.t2), np.clip(np.asarray(f.f, dtype=float), 0, None)
    M = F * np.outer(_grid_weights(t1), _grid_weights(t2))
    if not M.sum() > 0:
        raise ValueError("all-zero density")
    rows = M.sum(axis=1)
    keep = rows > 0
    P = M[keep] / rows[keep, None]
    return MarkovModel(np.asarray(t1)[keep], P, rows[keep] / rows.sum(),
                       tuple(int(i) for i in np.nonzero(~keep)[0]))


def markov_chain_3d(f2) -> np.ndarray:
    """Cell masses of (T0, T1, T2) for the Markov chain with the two-step law of ``f2``.

    Returns a mass array M3[i, j, k] = M2[i, j] * P(T2 = t[k] | T1 = t[j]).
    """
    M2 = np.clip(np.asarray(f2.f, dtype=float), 0, None) * np.outer(_grid_weights(f2.t1), _grid_weights(f2.t2))
    M2 = M2 / M2.sum()
    rows = M2.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        cond = np.where(rows[:, None] > 0, M2 / rows[:, None], 0.0)
    return M2[:, :, None] * cond[None, :, :]


@dataclass
class MarkovTestResult:
    """Deviations between P(T2 | T0, T1) and P(T2 | T1).

    ``table`` rows are (i, j, mass, tv_distance, max_abs_dev) per
    conditioning slice (T0 = t[i], T1 = t[j]) above the mass floor.
    """

    max_dev: float
    mean_dev: float
    tv_weighted: float
    table: np.ndarray
    skipped: int

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["i", "j", "mass", "tv_distance", "max_abs_dev"])
            for row in self.table:
                w.writerow([int(row[0]), int(row[1])] + [repr(float(x)) for x in row[2:]])


def markov_test(f3, f2=None, mass_floor: float = 1e-4) -> MarkovTestResult:
    """Compare the conditional law of T2 given (T0, T1) with that given T1 alone.

    ``f3`` has ``t`` and ``f`` (cell values on a common grid) or is a raw
    mass array; ``f2`` supplies P(T2 | T1) and defaults to the (T1, T2)
    marginal of ``f3``.  Slices (i, j) whose mass is below ``mass_floor``
    times the total are skipped.
    """
    if hasattr(f3, "f"):
        w = _grid_weights(np.asarray(f3.t))
        M3 = np.clip(np.asarray(f3.f, dtype=float), 0, None) * w[:, None, None] * w[None, :, None] * w[None, None, :]
    else:
        M3 = np.clip(np.asarray(f3, dtype=float), 0, None)
    total = M3.sum()
    if not total > 0:
        raise ValueError("all-zero density")
    M3 = M3 / total
    if f2 is None:
        M2 = M3.sum(axis=0)
    else:
        M2 = np.clip(np.asarray(f2.f, dtype=float), 0, None) * np.outer(_grid_weights(f2.t1), _grid_weights(f2.t2))
        M2 = M2 / M2.sum()
    rows = M2.sum(axis=1)
    slice_mass = M3.sum(axis=2)
    rows_out, skipped = [], 0
    for i in range(M3.shape[0]):
        for j in range(M3.shape[1]):
            m = slice_mass[i, j]
            if m < mass_floor or rows[j] <= 0:
                if m > 0:
                    skipped += 1
                continue
            p3 = M3[i, j] / m
            p2 = M2[j] / rows[j]
            d = np.abs(p3 - p2)
            rows_out.append((i, j, m, 0.5 * d.sum(), d.max()))
    if not rows_out:
        raise ValueError("no conditioning slice above the mass floor")
    table = np.array(rows_out)
    tv_weighted = float((table[:, 2] * table[:, 3]).sum() / table[:, 2].sum())
    return MarkovTestResult(float(table[:, 4].max()), float(table[:, 4].mean()), tv_weighted, table, skipped)
