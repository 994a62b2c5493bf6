"""Single-trial experiment drivers shared by the CLI and the acceptance tests.

Every trial is a pure function of its arguments: the dataset seed and all
initialisation draws come from substreams of the seed it is handed, so trials
can run in any order or process and still produce identical rows.
"""

from __future__ import annotations

import time

import numpy as np

from .adam import AdamConfig
from .core import InvalidConfigurationError, evaluate_objective, mean_opt_value
from .datagen import gen_gpca, gen_mlr, gen_mnr
from .diagnostics import lloyd_gd_bound_check, momentum_bound_check
from .gpca import gpca_assign, gpca_bcd, gpca_lloyd
from .lloyd import LloydConfig, lloyd_run
from .metrics import cluster_accuracy, min_loss, mlr_success
from .models import GpcaProblem, MlpProblem, RidgeProblem
from .momentum import MomentumConfig, _within_band, gamma_bar, momentum_run
from .rng import Rng
from .seeding import ExactGap, GradNorm, careful_seed, init_random, init_uniform_seeding

INIT_METHODS = ("random", "uniform", "proposed")


def trial_seed(seed: int, tag: str, trial: int) -> int:
    """64-bit seed for trial ``trial`` of experiment family ``tag``."""
    return Rng(seed).substream(tag).spawn(trial).seed


def _initial_params(method, problem, k, rng, mode):
    if method == "random":
        return init_random(problem, k, rng)
    if method == "uniform":
        return init_uniform_seeding(problem, k, rng).params
    if method == "proposed":
        return careful_seed(problem, k, mode, rng).params
    raise InvalidConfigurationError(f"unknown init method {method!r}")


# ---------------------------------------------------------------------------
# subspace clustering


def gpca_trial(k: int, d: int, n: int, seed: int, caps=(10, 50)) -> list:
    """Sum-of-minimum Lloyd vs product-objective BCD from one shared careful seeding.

    Returns one row per iteration cap with accuracies and wall times.
    """
    r = d - 2
    ds = gen_gpca(k, d, r, n, seed)
    problem = GpcaProblem(ds.inputs, r)
    init = careful_seed(problem, k, ExactGap(), Rng(seed).substream("init")).params
    rows = []
    for cap in caps:
        t0 = time.perf_counter()
        som = gpca_lloyd(ds.inputs, init, max_iters=cap)
        t_som = time.perf_counter() - t0
        t0 = time.perf_counter()
        sop = gpca_bcd(ds.inputs, init, iters=cap)
        t_sop = time.perf_counter() - t0
        rows.append({
            "cap": cap,
            "som_acc": cluster_accuracy(som.partition, ds.labels, k),
            "sop_acc": cluster_accuracy(gpca_assign(sop, ds.inputs), ds.labels, k),
            "som_iters": som.trace.records[-1].t,
            "som_time": t_som,
            "sop_time": t_sop,
        })
    return rows


# ---------------------------------------------------------------------------
# mixed linear regression


def mlr_trial(k: int, d: int, n: int, seed: int, lam: float = 0.01, sigma: float = 0.01,
              max_iters: int = 200, methods=INIT_METHODS) -> list:
    """Exact-minimizer Lloyd from each initialisation; success means ``F <= F(x+)``."""
    ds = gen_mlr(k, d, n, sigma, seed)
    problem = RidgeProblem(ds.inputs, ds.targets, lam)
    F_truth = evaluate_objective(ds.truth, problem)
    root = Rng(seed).substream("init")
    cfg = LloydConfig(update="exact", max_iters=max_iters, stop_on_stable_partition=True)
    rows = []
    for method in methods:
        x0 = _initial_params(method, problem, k, root.substream(method), ExactGap())
        res = lloyd_run(problem, x0, cfg)
        last = res.trace.records[-1]
        rows.append({
            "init": method,
            "success": mlr_success(last.objective, F_truth),
            "iterations": last.t,
            "F_final": last.objective,
            "F_truth": F_truth,
        })
    return rows


# ---------------------------------------------------------------------------
# mixed nonlinear regression


def mnr_problem(ds, lam, minimizer_steps, minimizer_lr, seed):
    return MlpProblem(ds.inputs, ds.targets, ds.meta["d_hidden"], lam,
                      minimizer_steps=minimizer_steps, minimizer_lr=minimizer_lr,
                      minimizer_seed=seed)


def mnr_trial(k: int, d_in: int, d_hidden: int, n: int, seed: int, *, mode: str = "target",
              epochs: int = 150, max_epochs: int = 20000, lam: float = 0.01,
              sigma: float = 0.01, lr: float = 1e-3, r: int = 10, n_test: int = 200,
              minimizer_steps: int = 200, minimizer_lr: float = 1e-3,
              methods=INIT_METHODS) -> list:
    """ADAM-driven Lloyd for mixed two-layer-network regression.

    One epoch is one full-batch ADAM step on every nonempty cluster.
    ``mode="target"`` counts epochs until ``F <= F(theta+)`` (capped at
    ``max_epochs``); ``mode="fixed"`` trains for ``epochs`` and reports the
    unregularised train/test losses.
    """
    if mode not in ("target", "fixed"):
        raise InvalidConfigurationError("mode must be 'target' or 'fixed'")
    ds = gen_mnr(k, d_in, d_hidden, n, sigma, seed, n_test=n_test)
    problem = mnr_problem(ds, lam, minimizer_steps, minimizer_lr, seed)
    F_truth = evaluate_objective(ds.truth, problem)
    root = Rng(seed).substream("init")
    adam = AdamConfig(lr=lr)
    rows = []
    for method in methods:
        x0 = _initial_params(method, problem, k, root.substream(method), GradNorm())
        if mode == "target":
            cfg = LloydConfig(update="adam", r=r, max_iters=max_epochs, adam=adam, target=F_truth)
        else:
            cfg = LloydConfig(update="adam", r=r, max_iters=epochs, adam=adam)
        res = lloyd_run(problem, x0, cfg)
        last = res.trace.records[-1]
        row = {
            "init": method,
            "epochs": last.t,
            "reached": res.trace.stop_reason == "target",
            "F_final": last.objective,
            "F_truth": F_truth,
            "train_loss": min_loss(ds.inputs, ds.targets, res.params, d_in, d_hidden),
            "test_loss": np.nan,
        }
        if ds.test is not None:
            row["test_loss"] = min_loss(ds.test.inputs, ds.test.targets, res.params,
                                        d_in, d_hidden)
        rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# convergence-rate checks


def ridge_instance(seed: int, n: int = 200, d: int = 5, k: int = 3, lam: float = 0.01,
                   sigma: float = 0.01) -> RidgeProblem:
    ds = gen_mlr(k, d, n, sigma, seed)
    return RidgeProblem(ds.inputs, ds.targets, lam)


def gd_rate_check(problem, k: int, seed: int, iters: int = 200):
    """Gradient-mode Lloyd with step ``1/L`` from a careful seeding."""
    x0 = careful_seed(problem, k, ExactGap(), Rng(seed).substream("init")).params
    res = lloyd_run(problem, x0, LloydConfig(update="gradient", gamma=1.0 / problem.L,
                                             max_iters=iters))
    return lloyd_gd_bound_check(res.trace, problem.L, mean_opt_value(problem))


def momentum_rate_check(problem, k: int, seed: int, iters: int = 200, beta: float = 0.5,
                        alpha: float = 1.25):
    """Momentum Lloyd at half the admissible step; also verifies the size band.

    Returns ``(BoundCheck, size_control_ok)``.
    """
    gamma = gamma_bar(alpha, beta, problem.L) / 2
    x0 = careful_seed(problem, k, ExactGap(), Rng(seed).substream("init")).params
    cfg = MomentumConfig(gamma=gamma, beta=beta, alpha=alpha, max_iters=iters)
    res = momentum_run(problem, x0, cfg, Rng(seed).substream("momentum"))
    sizes = [rec.sizes for rec in res.trace.records]
    band_ok = all(_within_band(new, ref, alpha) for ref, new in zip(sizes[:-1], sizes[1:]))
    check = momentum_bound_check(res.trace, gamma, beta, mean_opt_value(problem))
    return check, band_ok
