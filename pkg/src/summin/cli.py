"""Command-line experiment harness.

Every command takes ``--config PATH`` (JSON object), ``--seed``, ``--jobs``,
``--out``, ``--trials`` and ``--format``.  Values resolve as
flags > config file > built-in defaults.  Each run writes its tables (CSV or
JSON) plus ``summary.json`` holding the resolved configuration, aggregates
and wall-clock timings.  Timings never enter the tables, so tables are
byte-identical across runs with equal inputs.

Exit codes: 0 success, 2 configuration error, 3 a bounds check failed.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import experiments as ex
from .core import SumMinError, evaluate_objective, mean_opt_value
from .datagen import dump_dataset, gen_gpca, gen_mlr, gen_mnr, load_dataset
from .diagnostics import (
    brute_force_optimum,
    init_bound_experiment,
    init_ceiling,
)
from .gpca import gpca_assign, gpca_lloyd
from .lloyd import LloydConfig, lloyd_run
from .metrics import cluster_accuracy
from .models import GpcaProblem, QuadraticProblem, RidgeProblem
from .momentum import MomentumConfig, gamma_bar, momentum_run
from .rng import Rng
from .seeding import ExactGap, GradNorm, careful_seed, compute_scores

EXIT_OK, EXIT_CONFIG, EXIT_BOUNDS = 0, 2, 3

DEFAULTS = {
    "gpca-compare": {
        "cells": [[k, d] for k in (2, 3, 4) for d in (4, 5, 6)],
        "n": 1000, "caps": [10, 50], "trials": 100,
    },
    "mlr-compare": {
        "cells": [[k, d] for k in (4, 5, 6) for d in range(4, 9)],
        "n": 1000, "lam": 0.01, "sigma": 0.01, "max_iters": 200, "trials": 1000,
    },
    "mnr-train": {
        "cells": [[5, 3], [7, 5], [10, 5]], "k": 5, "n": 1000, "n_test": 200,
        "lam": 0.01, "sigma": 0.01, "lr": 1e-3, "r": 10, "mode": "target",
        "epochs": 150, "max_epochs": 20000, "minimizer_steps": 200,
        "minimizer_lr": 1e-3, "trials": 20,
    },
    "bounds-check": {
        "instances": 10, "n": 200, "d": 5, "k": 3, "lam": 0.01, "iters": 200,
        "beta": 0.5, "alpha": 1.25, "tiny_n": 8, "tiny_k": 2, "trials": 500,
    },
    "seed": {
        "data": None, "kind": "mlr", "k": 3, "d": 4, "n": 200, "lam": 0.01,
        "mode": "exact", "trials": 1,
    },
    "solve": {
        "data": None, "kind": "mlr", "k": 3, "d": 4, "n": 200, "lam": 0.01,
        "algorithm": "lloyd", "update": "exact", "gamma": None, "r": 1,
        "max_iters": 100, "beta": 0.5, "alpha": 1.25, "trials": 1,
    },
    "gen-data": {
        "kind": "mlr", "k": 3, "d": 4, "d_hidden": 3, "n": 200, "n_test": 0,
        "sigma": 0.01, "trials": 1,
    },
}


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------------------
# configuration and output helpers


def resolve_config(command: str, args) -> dict:
    cfg = json.loads(json.dumps(DEFAULTS[command]))
    if args.config:
        try:
            loaded = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = set(loaded) - set(cfg) - {"seed"}
        if unknown:
            raise ConfigError(f"unknown config keys for {command}: {sorted(unknown)}")
        for key, value in loaded.items():
            _check_type(key, value, cfg.get(key))
        cfg.update(loaded)
    cfg.setdefault("seed", 0)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.trials is not None:
        cfg["trials"] = args.trials
    if not (isinstance(cfg["seed"], int) and 0 <= cfg["seed"] < 2**64):
        raise ConfigError("seed must be an unsigned 64-bit integer")
    if not (isinstance(cfg["trials"], int) and cfg["trials"] >= 1):
        raise ConfigError("trials must be a positive integer")
    cells = cfg.get("cells")
    if cells is not None and not (
            cells and all(isinstance(c, list) and len(c) == 2
                          and all(isinstance(v, int) and v > 0 for v in c) for c in cells)):
        raise ConfigError("cells must be a non-empty list of [int, int] pairs")
    return cfg


def _check_type(key, value, default):
    if default is None or key == "seed":
        return
    numeric = (int, float)
    if isinstance(default, bool) or isinstance(value, bool):
        ok = isinstance(value, bool) and isinstance(default, bool)
    elif isinstance(default, int):
        ok = isinstance(value, int)
    elif isinstance(default, float):
        ok = isinstance(value, numeric)
    else:
        ok = isinstance(value, type(default))
    if not ok:
        raise ConfigError(f"config key {key!r} expects {type(default).__name__}, "
                          f"got {type(value).__name__}")


def _fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return int(value)
    return value


def write_table(out: Path, name: str, rows: list, columns: list, fmt: str) -> Path:
    if fmt == "csv":
        path = out / f"{name}.csv"
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(columns)
            for row in rows:
                w.writerow([_fmt(row[c]) for c in columns])
    else:
        path = out / f"{name}.json"
        data = [{c: _json_value(row[c]) for c in columns} for row in rows]
        path.write_text(json.dumps(data, indent=1) + "\n", encoding="utf-8")
    return path


def _json_value(v):
    v = _fmt(v)
    if isinstance(v, str) and v in ("nan", "inf", "-inf"):
        return None
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def write_summary(out: Path, payload: dict) -> None:
    text = json.dumps(payload, indent=1, sort_keys=True, default=_json_value)
    (out / "summary.json").write_text(text + "\n", encoding="utf-8")


def run_trials(fn, arg_list: list, jobs: int) -> list:
    """Map ``fn`` over ``arg_list``; results come back in input order."""
    if jobs <= 1 or len(arg_list) <= 1:
        return [fn(*a) for a in arg_list]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, *zip(*arg_list)))


def _mean(values):
    return float(np.mean(values)) if len(values) else float("nan")


# ---------------------------------------------------------------------------
# commands


def _gpca_job(k, d, n, seed, caps):
    return ex.gpca_trial(k, d, n, seed, tuple(caps))


def cmd_gpca_compare(cfg, out, fmt, jobs):
    """Columns: ``k, d, trial, seed, cap, som_acc, sop_acc, som_iters``."""
    args, keys = [], []
    for k, d in cfg["cells"]:
        for t in range(cfg["trials"]):
            s = ex.trial_seed(cfg["seed"], f"gpca:{k}:{d}", t)
            args.append((k, d, cfg["n"], s, cfg["caps"]))
            keys.append((k, d, t, s))
    results = run_trials(_gpca_job, args, jobs)
    rows, summary = [], []
    for (k, d, t, s), res in zip(keys, results):
        for row in res:
            rows.append({"k": k, "d": d, "trial": t, "seed": s, **row})
    for k, d in cfg["cells"]:
        for cap in cfg["caps"]:
            sel = [r for r in rows if r["k"] == k and r["d"] == d and r["cap"] == cap]
            summary.append({
                "k": k, "d": d, "cap": cap,
                "som_acc": _mean([r["som_acc"] for r in sel]),
                "sop_acc": _mean([r["sop_acc"] for r in sel]),
                "som_time": _mean([r["som_time"] for r in sel]),
                "sop_time": _mean([r["sop_time"] for r in sel]),
            })
    write_table(out, "gpca_trials", rows,
                ["k", "d", "trial", "seed", "cap", "som_acc", "sop_acc", "som_iters"], fmt)
    write_table(out, "gpca_summary", summary, ["k", "d", "cap", "som_acc", "sop_acc"], fmt)
    return {"cells": summary}, True


def _mlr_job(k, d, n, seed, lam, sigma, max_iters):
    return ex.mlr_trial(k, d, n, seed, lam, sigma, max_iters)


def cmd_mlr_compare(cfg, out, fmt, jobs):
    """Columns: ``k, d, trial, seed, init, success, iterations, F_final, F_truth``."""
    args, keys = [], []
    for k, d in cfg["cells"]:
        for t in range(cfg["trials"]):
            s = ex.trial_seed(cfg["seed"], f"mlr:{k}:{d}", t)
            args.append((k, d, cfg["n"], s, cfg["lam"], cfg["sigma"], cfg["max_iters"]))
            keys.append((k, d, t, s))
    results = run_trials(_mlr_job, args, jobs)
    rows = [{"k": k, "d": d, "trial": t, "seed": s, **row}
            for (k, d, t, s), res in zip(keys, results) for row in res]
    summary = []
    for k, d in cfg["cells"]:
        for method in ex.INIT_METHODS:
            sel = [r for r in rows if r["k"] == k and r["d"] == d and r["init"] == method]
            summary.append({
                "k": k, "d": d, "init": method,
                "failure_rate": 1.0 - _mean([r["success"] for r in sel]),
                "mean_iterations": _mean([r["iterations"] for r in sel]),
            })
    write_table(out, "mlr_trials", rows, ["k", "d", "trial", "seed", "init", "success",
                                          "iterations", "F_final", "F_truth"], fmt)
    write_table(out, "mlr_summary", summary,
                ["k", "d", "init", "failure_rate", "mean_iterations"], fmt)
    return {"cells": summary}, True


def _mnr_job(k, d_in, d_hidden, n, seed, opts):
    return ex.mnr_trial(k, d_in, d_hidden, n, seed, **opts)


def cmd_mnr_train(cfg, out, fmt, jobs):
    """Columns: ``d_in, d_hidden, trial, seed, init, epochs, reached, F_final, F_truth,
    train_loss, test_loss``."""
    if cfg["mode"] not in ("target", "fixed"):
        raise ConfigError("mnr-train mode must be 'target' or 'fixed'")
    opts = {key: cfg[key] for key in ("mode", "epochs", "max_epochs", "lam", "sigma", "lr",
                                      "r", "n_test", "minimizer_steps", "minimizer_lr")}
    args, keys = [], []
    for d_in, d_hidden in cfg["cells"]:
        for t in range(cfg["trials"]):
            s = ex.trial_seed(cfg["seed"], f"mnr:{d_in}:{d_hidden}", t)
            args.append((cfg["k"], d_in, d_hidden, cfg["n"], s, opts))
            keys.append((d_in, d_hidden, t, s))
    results = run_trials(_mnr_job, args, jobs)
    rows = [{"d_in": a, "d_hidden": h, "trial": t, "seed": s, **row}
            for (a, h, t, s), res in zip(keys, results) for row in res]
    summary = []
    for d_in, d_hidden in cfg["cells"]:
        for method in ex.INIT_METHODS:
            sel = [r for r in rows
                   if r["d_in"] == d_in and r["d_hidden"] == d_hidden and r["init"] == method]
            summary.append({
                "d_in": d_in, "d_hidden": d_hidden, "init": method,
                "mean_epochs": _mean([r["epochs"] for r in sel]),
                "reached_rate": _mean([r["reached"] for r in sel]),
                "train_loss": _mean([r["train_loss"] for r in sel]),
                "test_loss": _mean([r["test_loss"] for r in sel]),
            })
    write_table(out, "mnr_trials", rows,
                ["d_in", "d_hidden", "trial", "seed", "init", "epochs", "reached", "F_final",
                 "F_truth", "train_loss", "test_loss"], fmt)
    write_table(out, "mnr_summary", summary, ["d_in", "d_hidden", "init", "mean_epochs",
                                              "reached_rate", "train_loss", "test_loss"], fmt)
    return {"cells": summary}, True


def _kmeanspp_check(seed: int):
    """Largest deviation between careful-seeding weights and squared-distance weights."""
    rng = Rng(seed).substream("kmeans++")
    pts = rng.normal((12, 3))
    problem = QuadraticProblem(pts)
    centers = pts[[0, 5]]
    v = compute_scores(centers, problem, ExactGap())
    d2 = np.min(np.sum((pts[:, None, :] - centers[None]) ** 2, axis=2), axis=1)
    return float(np.max(np.abs(v / v.sum() - d2 / d2.sum())))


def cmd_bounds_check(cfg, out, fmt, jobs):
    """Columns: ``check, instance, lhs, rhs, pass``."""
    rows = []
    for i in range(cfg["instances"]):
        s = ex.trial_seed(cfg["seed"], "bounds", i)
        problem = ex.ridge_instance(s, cfg["n"], cfg["d"], cfg["k"], cfg["lam"])
        gd = ex.gd_rate_check(problem, cfg["k"], s, cfg["iters"])
        rows.append({"check": "lloyd_gd_rate", "instance": i, "lhs": gd.lhs, "rhs": gd.rhs,
                     "pass": gd.ok})
        mo, band = ex.momentum_rate_check(problem, cfg["k"], s, cfg["iters"], cfg["beta"],
                                          cfg["alpha"])
        rows.append({"check": "momentum_rate", "instance": i, "lhs": mo.lhs, "rhs": mo.rhs,
                     "pass": mo.ok})
        rows.append({"check": "size_control", "instance": i, "lhs": float(band), "rhs": 1.0,
                     "pass": band})
    dev = _kmeanspp_check(cfg["seed"])
    rows.append({"check": "kmeanspp_weights", "instance": 0, "lhs": dev, "rhs": 1e-12,
                 "pass": dev <= 1e-12})
    tiny = QuadraticProblem(Rng(cfg["seed"]).substream("tiny").normal((cfg["tiny_n"], 2)))
    F_star, _ = brute_force_optimum(tiny, cfg["tiny_k"])
    stats = init_bound_experiment(tiny, cfg["tiny_k"], cfg["trials"], ExactGap(),
                                  Rng(cfg["seed"]).substream("init-bound"), F_star)
    rows.append({"check": "init_ratio_upper99", "instance": 0, "lhs": stats.upper99,
                 "rhs": init_ceiling(cfg["tiny_k"], tiny.L, tiny.mu),
                 "pass": stats.within_ceiling})
    write_table(out, "bounds", rows, ["check", "instance", "lhs", "rhs", "pass"], fmt)
    ok = all(r["pass"] for r in rows)
    return {"all_pass": ok, "init_ratio_mean": stats.mean}, ok


def _problem_from_config(cfg):
    """Dataset from ``data`` (a dump file) or freshly generated from ``kind``."""
    if cfg["data"]:
        ds = load_dataset(cfg["data"])
    elif cfg["kind"] == "mlr":
        ds = gen_mlr(cfg["k"], cfg["d"], cfg["n"], 0.01, cfg["seed"])
    elif cfg["kind"] == "gpca":
        ds = gen_gpca(cfg["k"], cfg["d"], cfg["d"] - 2, cfg["n"], cfg["seed"])
    else:
        raise ConfigError("seed/solve generate only 'mlr' or 'gpca' data; pass 'data' otherwise")
    if ds.kind == "mlr":
        return ds, RidgeProblem(ds.inputs, ds.targets, cfg["lam"])
    if ds.kind == "gpca":
        return ds, GpcaProblem(ds.inputs, int(ds.meta["r"]))
    raise ConfigError(f"unsupported dataset kind {ds.kind!r} for this command")


def cmd_seed(cfg, out, fmt, jobs):
    """Columns: ``trial, round, index, score_total``."""
    ds, problem = _problem_from_config(cfg)
    mode = {"exact": ExactGap(), "gradnorm": GradNorm()}.get(cfg["mode"])
    if mode is None:
        raise ConfigError("mode must be 'exact' or 'gradnorm'")
    rows = []
    for t in range(cfg["trials"]):
        res = careful_seed(problem, ds.k, mode,
                           Rng(cfg["seed"]).substream("seed-cmd").spawn(t))
        totals = [float("nan")] + [float(v.sum()) for v in res.scores]
        for j, (i, tot) in enumerate(zip(res.indices, totals)):
            rows.append({"trial": t, "round": j + 1, "index": int(i), "score_total": tot})
    write_table(out, "seed", rows, ["trial", "round", "index", "score_total"], fmt)
    return {"n": problem.n}, True


def cmd_solve(cfg, out, fmt, jobs):
    """Columns: ``trial, t, objective, grad_norm_sq`` plus a final-parameter table."""
    ds, problem = _problem_from_config(cfg)
    k = ds.k
    rows, finals = [], []
    for t in range(cfg["trials"]):
        rng = Rng(cfg["seed"]).substream("solve").spawn(t)
        init = careful_seed(problem, k, ExactGap(), rng.substream("init")).params
        if ds.kind == "gpca":
            res = gpca_lloyd(ds.inputs, init, max_iters=cfg["max_iters"])
        elif cfg["algorithm"] == "momentum":
            gamma = cfg["gamma"] or gamma_bar(cfg["alpha"], cfg["beta"], problem.L) / 2
            mcfg = MomentumConfig(gamma=gamma, beta=cfg["beta"], alpha=cfg["alpha"], r=cfg["r"],
                                  max_iters=cfg["max_iters"])
            res = momentum_run(problem, init, mcfg, rng.substream("momentum"))
        elif cfg["algorithm"] == "lloyd":
            gamma = cfg["gamma"]
            if cfg["update"] == "gradient" and gamma is None:
                gamma = 1.0 / problem.L
            lcfg = LloydConfig(update=cfg["update"], gamma=gamma, r=cfg["r"],
                               max_iters=cfg["max_iters"])
            res = lloyd_run(problem, init, lcfg)
        else:
            raise ConfigError("algorithm must be 'lloyd' or 'momentum'")
        for rec in res.trace.records:
            rows.append({"trial": t, "t": rec.t, "objective": rec.objective,
                         "grad_norm_sq": rec.grad_norm_sq})
        finals.append({"trial": t, "objective": evaluate_objective(res.params, problem),
                       "f_star": mean_opt_value(problem),
                       "accuracy": cluster_accuracy(
                           gpca_assign(res.params, ds.inputs) if ds.kind == "gpca"
                           else res.partition, ds.labels, k)})
    write_table(out, "trace", rows, ["trial", "t", "objective", "grad_norm_sq"], fmt)
    write_table(out, "result", finals, ["trial", "objective", "f_star", "accuracy"], fmt)
    return {"results": finals}, True


def cmd_gen_data(cfg, out, fmt, jobs):
    """Writes ``dataset.jsonl`` and a flat ``data`` table (``i, label, b, x0..``)."""
    kind = cfg["kind"]
    if kind == "mlr":
        ds = gen_mlr(cfg["k"], cfg["d"], cfg["n"], cfg["sigma"], cfg["seed"])
    elif kind == "gpca":
        ds = gen_gpca(cfg["k"], cfg["d"], cfg["d"] - 2, cfg["n"], cfg["seed"])
    elif kind == "mnr":
        ds = gen_mnr(cfg["k"], cfg["d"], cfg["d_hidden"], cfg["n"], cfg["sigma"], cfg["seed"],
                     n_test=cfg["n_test"])
    else:
        raise ConfigError("kind must be 'gpca', 'mlr' or 'mnr'")
    dump_dataset(ds, out / "dataset.jsonl")
    xcols = [f"x{c}" for c in range(ds.inputs.shape[1])]
    rows = []
    for i in range(ds.n):
        row = {"i": i, "label": int(ds.labels[i]),
               "b": float("nan") if ds.targets is None else float(ds.targets[i])}
        row.update({c: float(v) for c, v in zip(xcols, ds.inputs[i])})
        rows.append(row)
    write_table(out, "data", rows, ["i", "label", "b"] + xcols, fmt)
    return {"n": ds.n, "kind": kind}, True


COMMANDS = {
    "gpca-compare": cmd_gpca_compare,
    "mlr-compare": cmd_mlr_compare,
    "mnr-train": cmd_mnr_train,
    "bounds-check": cmd_bounds_check,
    "seed": cmd_seed,
    "solve": cmd_solve,
    "gen-data": cmd_gen_data,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="summin", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, help=(fn.__doc__ or "").strip().split("\n")[0])
        p.add_argument("--config", help="JSON file with command settings")
        p.add_argument("--seed", type=int, help="unsigned 64-bit master seed")
        p.add_argument("--jobs", type=int, default=1, help="worker processes for trials")
        p.add_argument("--out", help="output directory (default $SOM_OUT_DIR/<command>)")
        p.add_argument("--trials", type=int, help="number of trials")
        p.add_argument("--format", choices=("csv", "json"), default="csv",
                       help="table format")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.jobs < 1:
            raise ConfigError("--jobs must be at least 1")
        cfg = resolve_config(args.command, args)
        out = Path(args.out) if args.out else (
            Path(os.environ.get("SOM_OUT_DIR", "som_out")) / args.command)
        out.mkdir(parents=True, exist_ok=True)
        t0 = time.perf_counter()
        summary, ok = COMMANDS[args.command](cfg, out, args.format, args.jobs)
    except (ConfigError, SumMinError) as exc:
        print(f"summin {args.command}: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    write_summary(out, {"command": args.command, "config": cfg, "ok": ok,
                        "wall_time": time.perf_counter() - t0, **summary})
    print(f"summin {args.command}: wrote {out}")
    if not ok:
        print(f"summin {args.command}: some checks failed", file=sys.stderr)
        return EXIT_BOUNDS
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
