"""Command-line front end.

Every command writes its results into ``--out`` (default: current
directory) as CSV files plus a JSON summary holding the fully resolved
configuration.  Wall-clock timings go to a separate ``*.timing.json`` so
that data files are bit-identical across reruns with the same config.

Exit codes: 0 ok, 2 configuration error, 3 numerical failure,
4 comparison failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .covmodel import NotPositiveDefiniteError, catalog_codes, get_model, read_spectrum_csv
from .mvnexp import SPEED_PRESETS, MvnOptions

log = logging.getLogger("levelcross")

SCHEMA_VERSION = 1
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_COMPARE = 0, 2, 3, 4


class ConfigError(Exception):
    pass


class CompareFailure(Exception):
    pass


def _speed_table() -> str:
    rows = [f"  {k}: {n} points x {m} shifts, sd_tol {t:g}" for k, (n, m, t) in SPEED_PRESETS.items()]
    return "speed presets (lattice points x random shifts, truncation tolerance):\n" + "\n".join(rows)


# ---------------------------------------------------------------------------
# output helpers


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if math.isfinite(v) else str(v)
    if isinstance(x, np.integer):
        return int(x)
    return x


def _write_json(path: Path, data: dict) -> None:
    path.write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n")


def _write_csv(path: Path, header, rows, config: dict) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("# " + json.dumps(_jsonable(config), sort_keys=True) + "\n")
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])


def _write_grid_csv(path: Path, t1, t2, f, err, terr, config) -> None:
    rows = []
    for i, a in enumerate(t1):
        for j, b in enumerate(t2):
            rows.append((float(a), float(b), float(f[i, j]), float(err[i, j]), float(terr[i, j])))
    _write_csv(path, ["t1", "t2", "f", "err", "terr"], rows, config)


class Run:
    """Collects outputs of one command."""

    def __init__(self, name: str, args: argparse.Namespace, config: dict):
        self.name, self.config = name, config
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.t0 = time.perf_counter()

    def path(self, suffix: str) -> Path:
        return self.out / f"{self.name}{suffix}"

    def finish(self, summary: dict) -> dict:
        summary = {"schema_version": SCHEMA_VERSION, "package_version": __version__,
                   "command": self.name, "config": self.config, **summary}
        _write_json(self.path(".json"), summary)
        _write_json(self.path(".timing.json"), {"wall_time_s": time.perf_counter() - self.t0})
        print(json.dumps(_jsonable({k: v for k, v in summary.items() if k != "config"}), sort_keys=True))
        return summary


# ---------------------------------------------------------------------------
# config handling


def _model(cfg: dict):
    if cfg.get("spectrum_csv"):
        return read_spectrum_csv(cfg["spectrum_csv"])
    code = cfg.get("model")
    if not code:
        raise ConfigError("a model code (--model) or --spectrum-csv is required")
    try:
        return get_model(code, normalized=cfg.get("normalized", True))
    except KeyError as exc:
        raise ConfigError(f"unknown model {code!r}; known: {', '.join(catalog_codes())}") from exc


def _opts(cfg: dict) -> MvnOptions:
    try:
        return MvnOptions(speed=int(cfg.get("speed", 4)), seed=int(cfg.get("seed", 0)),
                          max_dim=int(cfg.get("max_dim", 400)))
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _resolve(args: argparse.Namespace, keys) -> dict:
    cfg = {}
    if getattr(args, "config", None):
        try:
            cfg.update(json.loads(Path(args.config).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
    for k in keys:
        v = getattr(args, k, None)
        if v is not None:
            cfg[k] = v
    return cfg


# ---------------------------------------------------------------------------
# commands


def cmd_jointpdf(args):
    from .crossings import joint_interval_pdf

    cfg = _resolve(args, ["model", "normalized", "dt", "n", "level", "speed", "seed", "n_sub", "max_dim", "threads"])
    cfg.setdefault("dt", 0.2)
    cfg.setdefault("n", 60)
    cfg.setdefault("level", 0.0)
    cfg.setdefault("n_sub", 1)
    cfg.setdefault("speed", 4)
    cfg.setdefault("seed", 0)
    model = _model(cfg)
    if 2 * cfg["n"] * cfg["n_sub"] + 4 > cfg.get("max_dim", 400):
        raise ConfigError("grid too large: 2*n*n_sub + 4 exceeds max_dim")
    run = Run("jointpdf", args, cfg)
    j = joint_interval_pdf(model, dt=cfg["dt"], n=cfg["n"], u=cfg["level"], opts=_opts(cfg),
                           n_sub=cfg["n_sub"], workers=cfg.get("threads", 1))
    _write_grid_csv(run.path(".csv"), j.t1, j.t2, j.f, j.err, j.terr, cfg)
    return run.finish({"normalization": j.normalization, "means": j.means, "correlation": j.correlation,
                       "kl": j.kl, "max_err": float(j.err.max()), "max_terr": float(j.terr.max())})


def cmd_intervalpdf(args):
    from .crossings import interval_density

    cfg = _resolve(args, ["model", "normalized", "dt", "tmax", "level", "side", "speed", "seed"])
    cfg.setdefault("dt", 0.2)
    cfg.setdefault("tmax", 30.0)
    cfg.setdefault("level", 0.0)
    cfg.setdefault("side", "above")
    model = _model(cfg)
    run = Run("intervalpdf", args, cfg)
    d = interval_density(model, cfg["tmax"], dt=cfg["dt"], u=cfg["level"], side=cfg["side"], opts=_opts(cfg))
    _write_csv(run.path(".csv"), ["t", "f", "err"], zip(d.t, d.f, d.err), cfg)
    return run.finish({"normalization": d.normalization, "mean": d.mean})


def cmd_persistence(args):
    from .crossings import persistence_exponent, persistence_QT

    cfg = _resolve(args, ["model", "normalized", "dt", "Tmax", "Tstep", "level", "runs", "seed",
                          "n_points", "shifts_per_run", "fit", "window_lo", "window_hi"])
    cfg.setdefault("normalized", False)
    cfg.setdefault("dt", 0.1)
    cfg.setdefault("Tmax", 30.0)
    cfg.setdefault("Tstep", 0.5)
    cfg.setdefault("level", 0.0)
    cfg.setdefault("runs", 50)
    cfg.setdefault("seed", 0)
    cfg.setdefault("n_points", 509)
    cfg.setdefault("shifts_per_run", 4)
    cfg.setdefault("fit", "local-quadratic")
    model = _model(cfg)
    T = np.round(np.arange(cfg["Tstep"], cfg["Tmax"] + 1e-9, cfg["Tstep"]) / cfg["dt"]) * cfg["dt"]
    if T.size < 3:
        raise ConfigError("need at least three T values")
    run = Run("persistence", args, cfg)
    curve = persistence_QT(model, T, u=cfg["level"], n_runs=cfg["runs"], seed=cfg["seed"], dt=cfg["dt"],
                           n_points=cfg["n_points"], shifts_per_run=cfg["shifts_per_run"])
    window = None
    if "window_lo" in cfg or "window_hi" in cfg:
        window = (cfg.get("window_lo", 0.0), cfg.get("window_hi", cfg["Tmax"]))
    # without a window the fit uses all T where Q is still reliably resolved
    theta, info = persistence_exponent(curve, fit=cfg["fit"], window=window)
    _write_csv(run.path(".csv"), ["T", "Q", "Q_err", "local_theta"],
               zip(curve.T, curve.Q, curve.Q_err, curve.local_theta), cfg)
    return run.finish({"theta": theta, "fit": cfg["fit"], "window": info["window"], "n_runs": curve.n_runs,
                       "unreliable_T": curve.T[curve.unreliable]})


def cmd_iia_theta(args):
    from .iia import clipped_evaluator, diffusion2d_series, laplace_cov, rational_continuation, theta_iia

    cfg = _resolve(args, ["model", "L", "mu", "method"])
    run = Run("iia-theta", args, cfg)
    code = cfg.get("model", "BMS2")
    if code == "BMS2" and cfg.get("method", "series") == "series":
        Ls = cfg.get("L")
        Ls = [Ls] if Ls is not None else [0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 15, 20, 30]
        rows = []
        for L in Ls:
            a = diffusion2d_series(int(L), mu=cfg.get("mu", 2 * math.pi))
            rows.append((L, a.theta_L, a.total_mass))
        _write_csv(run.path(".csv"), ["L", "theta_L", "total_mass"], rows, cfg)
        return run.finish({"theta": {int(r[0]): r[1] for r in rows}})
    cfg["normalized"] = False
    model = _model(cfg)
    mu = cfg.get("mu", model.mean_interval)
    lc = laplace_cov(clipped_evaluator(model))
    if lc.s_min >= 0:
        lc = rational_continuation(lc)
    theta = theta_iia(lc, mu)
    return run.finish({"theta": theta, "mu": mu, "continuation": lc.method})


def cmd_iia_quasicdf(args):
    from .iia import diffusion2d_series, quasi_cdf

    cfg = _resolve(args, ["L", "tmax", "npts"])
    cfg.setdefault("L", 3)
    cfg.setdefault("tmax", 20.0)
    cfg.setdefault("npts", 401)
    run = Run("iia-quasicdf", args, cfg)
    a = diffusion2d_series(int(cfg["L"]))
    t = np.linspace(0, cfg["tmax"], int(cfg["npts"]))
    F = quasi_cdf(a, t)
    _write_csv(run.path(".csv"), ["t", "F"], zip(t, F), cfg)
    return run.finish({"theta_L": a.theta_L, "atom": a.atom_at_zero,
                       "monotone": bool(np.all(np.diff(F[1:]) >= 0)), "poles": a.poles.real,
                       "residues": a.residues.real})


def _load_joint(path):
    from .crossings import JointDensity2D

    data = np.loadtxt(path, delimiter=",", comments="#", skiprows=2)
    t1, t2 = np.unique(data[:, 0]), np.unique(data[:, 1])
    shape = (t1.size, t2.size)
    return JointDensity2D(t1, t2, data[:, 2].reshape(shape), data[:, 3].reshape(shape), data[:, 4].reshape(shape))


def cmd_measures(args):
    from .covmodel import normalize
    from .crossings import joint_interval_pdf

    cfg = _resolve(args, ["model", "input", "dt", "n", "speed", "seed"])
    run = Run("measures", args, cfg)
    if cfg.get("input"):
        j = _load_joint(cfg["input"])
        alpha = None
    else:
        cfg.setdefault("dt", 0.25)
        cfg.setdefault("n", 60)
        cfg.setdefault("speed", 3)
        model = _model(cfg)
        j = joint_interval_pdf(model, dt=cfg["dt"], n=cfg["n"], opts=_opts(cfg))
        alpha = normalize(model).moments().alpha
    return run.finish({"alpha": alpha, "correlation": j.correlation, "kl": j.kl,
                       "normalization": j.normalization})


def cmd_markov_test(args):
    from .crossings import tri_interval_pdf
    from .deps import markov_test

    cfg = _resolve(args, ["model", "dt", "n", "kmin", "speed", "seed"])
    cfg.setdefault("dt", math.pi / 12)
    cfg.setdefault("n", 26)
    cfg.setdefault("kmin", 3)
    cfg.setdefault("speed", 6)
    model = _model(cfg)
    run = Run("markov-test", args, cfg)
    f3 = tri_interval_pdf(model, dt=cfg["dt"], n=cfg["n"], k_min=cfg["kmin"], opts=_opts(cfg))
    res = markov_test(f3)
    _write_csv(run.path(".csv"), ["i", "j", "mass", "tv_distance", "max_abs_dev"],
               ((int(r[0]), int(r[1]), *map(float, r[2:])) for r in res.table), cfg)
    return run.finish({"tv_weighted": res.tv_weighted, "max_dev": res.max_dev, "mean_dev": res.mean_dev,
                       "skipped_slices": res.skipped})


def cmd_simulate(args):
    from .simlab import IntervalSequence, extract_intervals, simulate_paths, write_intervals

    cfg = _resolve(args, ["model", "dt", "points", "paths", "level", "seed"])
    cfg.setdefault("dt", 0.05)
    cfg.setdefault("points", 1 << 20)
    cfg.setdefault("paths", 1)
    cfg.setdefault("level", 0.0)
    cfg.setdefault("seed", 0)
    model = _model(cfg)
    run = Run("simulate", args, cfg)
    seqs = []
    for i in range(cfg["paths"]):
        p = simulate_paths(model, cfg["points"], cfg["dt"], 1, seed=cfg["seed"] + 7919 * i)
        seqs.append(extract_intervals(p.x[0], cfg["dt"], cfg["level"]))
    seq = IntervalSequence.concat(seqs)
    write_intervals(run.path(".bin"), seq)
    return run.finish({"intervals": len(seq), "mean_interval": float(seq.length.mean()) if len(seq) else None,
                       "record_layout": "little-endian float64 triples (start, length, side)"})


def cmd_compare(args):
    from .crossings import joint_interval_pdf
    from .simlab import IntervalSequence, bin_average, empirical_joint, extract_intervals, simulate_paths

    cfg = _resolve(args, ["model", "normalized", "dt", "n", "level", "speed", "seed", "pairs", "sim_dt", "multiple",
                          "mass_floor"])
    cfg.setdefault("dt", 0.2)
    cfg.setdefault("n", 40)
    cfg.setdefault("level", 0.0)
    cfg.setdefault("pairs", 100_000)
    cfg.setdefault("sim_dt", 0.05)
    cfg.setdefault("multiple", 3.0)
    cfg.setdefault("mass_floor", 1e-4)
    model = _model(cfg)
    run = Run("compare", args, cfg)
    # the histogram estimates bin averages, so the density is averaged over the same bins
    fine = joint_interval_pdf(model, dt=cfg["dt"] / 2, n=2 * cfg["n"], u=cfg["level"], opts=_opts(cfg))
    rice = bin_average(fine)
    seqs, npairs, i = [], 0, 0
    while npairs < cfg["pairs"]:
        p = simulate_paths(model, 1 << 20, cfg["sim_dt"], 1, seed=cfg.get("seed", 0) + 7919 * i)
        s = extract_intervals(p.x[0], cfg["sim_dt"], cfg["level"])
        seqs.append(s)
        npairs += s.pairs()[0].size
        i += 1
    emp = empirical_joint(IntervalSequence.concat(seqs), rice.t1)
    stat = compare_joint(rice, emp, cfg["mass_floor"])
    summary = run.finish({"sup_ratio": stat["sup_ratio"], "cells": stat["cells"], "pairs": npairs})
    if stat["sup_ratio"] > cfg["multiple"]:
        raise CompareFailure(f"sup deviation {stat['sup_ratio']:.2f} x combined error exceeds {cfg['multiple']}")
    return summary


def compare_joint(rice, emp, mass_floor: float = 1e-4) -> dict:
    """Largest |rice - empirical| / combined error over cells with mass above the floor."""
    from .deps import _grid_weights

    W = np.outer(_grid_weights(rice.t1), _grid_weights(rice.t2))
    mass = emp.f * W
    sel = mass >= mass_floor
    comb = np.hypot(rice.err + rice.terr, emp.err)
    ratio = np.abs(rice.f - emp.f)[sel] / np.maximum(comb[sel], 1e-300)
    return {"sup_ratio": float(ratio.max()) if ratio.size else 0.0, "cells": int(sel.sum()),
            "ratio": ratio}


def cmd_reproduce(args):
    table = args.table
    if table == "table4":
        args.L, args.mu, args.method, args.model = None, None, "series", "BMS2"
        return cmd_iia_theta(args)
    if table == "table3":
        dims = args.dims or [1, 2, 3]
        out = {}
        for d in dims:
            ns = argparse.Namespace(**vars(args))
            ns.model, ns.normalized = f"BMS{d}", False
            ns.Tmax = {1: 30.0, 2: 30.0, 3: 20.0}.get(d, 15.0)
            ns.runs = args.runs or 50
            ns.out = str(Path(args.out) / f"BMS{d}")
            out[d] = cmd_persistence(ns)["theta"]
        return out
    if table == "table2":
        codes = args.models or ["LH1", "LH2", "LH3", "LH4", "LH5", "LH6", "LH7", "WN", "BS", "J"]
        rows = {}
        for code in codes:
            ns = argparse.Namespace(**vars(args))
            ns.model, ns.input = code, None
            ns.out = str(Path(args.out) / code)
            rows[code] = cmd_measures(ns)
        return rows
    raise ConfigError(f"unknown table {table!r}; use table2, table3 or table4")


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="levelcross", description=__doc__.split("\n\n")[0],
                                epilog=_speed_table(), formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with config keys (flags override)")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--threads", type=int, default=None, help="maximum worker threads")
    common.add_argument("--speed", type=int, choices=range(1, 10), default=None)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--model", default=None, help="catalog code: " + " ".join(catalog_codes()))
    common.add_argument("--spectrum-csv", dest="spectrum_csv", default=None)
    common.add_argument("--raw", dest="normalized", action="store_false", default=None,
                        help="use the model un-normalized (own time units)")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("jointpdf", parents=[common], help="joint density of two successive intervals")
    s.add_argument("--dt", type=float)
    s.add_argument("--n", type=int)
    s.add_argument("--level", type=float)
    s.add_argument("--n-sub", dest="n_sub", type=int)
    s.add_argument("--max-dim", dest="max_dim", type=int)
    s.set_defaults(func=cmd_jointpdf)

    s = sub.add_parser("intervalpdf", parents=[common], help="stationary interval density")
    s.add_argument("--dt", type=float)
    s.add_argument("--tmax", type=float)
    s.add_argument("--level", type=float)
    s.add_argument("--side", choices=["above", "below"])
    s.set_defaults(func=cmd_intervalpdf)

    s = sub.add_parser("persistence", parents=[common], help="persistence curve and exponent")
    s.add_argument("--dt", type=float)
    s.add_argument("--Tmax", type=float)
    s.add_argument("--Tstep", type=float)
    s.add_argument("--level", type=float)
    s.add_argument("--runs", type=int)
    s.add_argument("--n-points", dest="n_points", type=int)
    s.add_argument("--shifts-per-run", dest="shifts_per_run", type=int)
    s.add_argument("--fit", choices=["global", "local-quadratic"])
    s.add_argument("--window-lo", dest="window_lo", type=float)
    s.add_argument("--window-hi", dest="window_hi", type=float)
    s.set_defaults(func=cmd_persistence)

    s = sub.add_parser("iia-theta", parents=[common], help="IIA persistence exponent")
    s.add_argument("--L", type=int)
    s.add_argument("--mu", type=float)
    s.add_argument("--method", choices=["series", "quadrature"])
    s.set_defaults(func=cmd_iia_theta)

    s = sub.add_parser("iia-quasicdf", parents=[common], help="quasi-cdf of the order-L IIA approximation")
    s.add_argument("--L", type=int)
    s.add_argument("--tmax", type=float)
    s.add_argument("--npts", type=int)
    s.set_defaults(func=cmd_iia_quasicdf)

    s = sub.add_parser("measures", parents=[common], help="correlation and KL distance of (T1, T2)")
    s.add_argument("--input", help="joint density CSV written by jointpdf")
    s.add_argument("--dt", type=float)
    s.add_argument("--n", type=int)
    s.set_defaults(func=cmd_measures)

    s = sub.add_parser("markov-test", parents=[common], help="Markov test on three successive intervals")
    s.add_argument("--dt", type=float)
    s.add_argument("--n", type=int)
    s.add_argument("--kmin", type=int)
    s.set_defaults(func=cmd_markov_test)

    s = sub.add_parser("simulate", parents=[common], help="simulate paths and write crossing intervals")
    s.add_argument("--dt", type=float)
    s.add_argument("--points", type=int)
    s.add_argument("--paths", type=int)
    s.add_argument("--level", type=float)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("compare", parents=[common], help="Rice joint density against simulation")
    s.add_argument("--dt", type=float)
    s.add_argument("--n", type=int)
    s.add_argument("--level", type=float)
    s.add_argument("--pairs", type=int)
    s.add_argument("--sim-dt", dest="sim_dt", type=float)
    s.add_argument("--multiple", type=float)
    s.add_argument("--mass-floor", dest="mass_floor", type=float)
    s.set_defaults(func=cmd_compare)

    s = sub.add_parser("reproduce", parents=[common], help="regenerate table2, table3 or table4")
    s.add_argument("table")
    s.add_argument("--dims", type=int, nargs="*")
    s.add_argument("--models", nargs="*")
    s.add_argument("--runs", type=int)
    s.add_argument("--dt", type=float)
    s.add_argument("--n", type=int)
    s.add_argument("--Tstep", type=float)
    s.set_defaults(func=cmd_reproduce)
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("LEVELCROSS_LOG", "WARNING"))
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CompareFailure as exc:
        print(f"comparison failed: {exc}", file=sys.stderr)
        return EXIT_COMPARE
    except (NotPositiveDefiniteError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure in {args.command}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
