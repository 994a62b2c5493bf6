"""Momentum Lloyd's algorithm with size-controlled reclassification.

Per iteration and cluster ``j``::

    x_j <- x_j - gamma m_j
    u_j  = (x_j_new - beta x_j_old) / (1 - beta)        (every r iterations)
    C    <- controlled reclassification around u
    m_j <- beta m_j + grad F_j(x_j_new)

Controlled reclassification visits indices in random order and moves each to
its best cluster under ``u``; it stops, keeping the last valid state, as soon
as some cluster size leaves ``[|C_j_ref| / alpha, alpha |C_j_ref|]``.
Clusters that were empty in the reference partition have no upper bound.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import InvalidConfigurationError, Partition, Problem, RunTrace, reclassify
from .lloyd import RunResult
from .rng import Rng


@dataclass(frozen=True)
class MomentumConfig:
    gamma: float
    beta: float = 0.5
    alpha: float = 1.25
    r: int = 1
    max_iters: int = 100
    record_history: bool = False

    def __post_init__(self):
        if not self.gamma > 0:
            raise InvalidConfigurationError("gamma must be positive")
        if not 0 < self.beta < 1:
            raise InvalidConfigurationError("beta must lie in (0, 1)")
        if not self.alpha > 1:
            raise InvalidConfigurationError("alpha must exceed 1")
        if not self.alpha * self.beta < 1:
            raise InvalidConfigurationError("alpha * beta must be below 1")
        if self.r < 1 or self.max_iters < 0:
            raise InvalidConfigurationError("need r >= 1 and max_iters >= 0")


def gamma_bar(alpha: float, beta: float, L: float) -> float:
    """Largest step size covered by the momentum convergence guarantee."""
    if not (alpha > 1 and 0 < beta < 1 and L > 0):
        raise InvalidConfigurationError("need alpha > 1, 0 < beta < 1, L > 0")
    if alpha * beta >= 1:
        raise InvalidConfigurationError("alpha * beta must be below 1")
    first = (1 - beta) / (2 * L)
    second = (1 - beta) ** 1.5 * (1 - alpha * beta) ** 0.5 / (2 * alpha**0.5 * L * beta)
    return min(first, second)


def _within_band(sizes, ref, alpha) -> bool:
    sizes, ref = np.asarray(sizes), np.asarray(ref)
    lower_ok = np.all(sizes * alpha >= ref)
    upper_ok = np.all((sizes <= alpha * ref) | (ref == 0))
    return bool(lower_ok and upper_ok)


def satisfies_size_control(reference: Partition, new: Partition, alpha: float) -> bool:
    return _within_band(new.sizes(), reference.sizes(), alpha)


def controlled_reclassify(current: Partition, u_params, problem: Problem, alpha: float,
                          rng: Rng) -> Partition:
    if not alpha > 1:
        raise InvalidConfigurationError("alpha must exceed 1")
    targets = reclassify(u_params, problem).assignment
    ref = current.sizes()
    sizes = ref.copy()
    assign = current.assignment.copy()
    for i in rng.permutation(current.n):
        new, old = targets[i], assign[i]
        if new == old:
            continue
        sizes[old] -= 1
        sizes[new] += 1
        if not _within_band(sizes, ref, alpha):
            break
        assign[i] = new
    return Partition(assign, current.k)


def momentum_run(problem: Problem, init, cfg: MomentumConfig,
                 rng: Optional[Rng] = None) -> RunResult:
    """Run ``cfg.max_iters`` momentum iterations.

    The trace holds ``t = 0..T``; record ``t`` pairs ``x^(t)`` with ``C^(t)``,
    where ``C^(0)`` is the plain reclassification of the initial parameters.
    The returned partition is the maintained ``C^(T)``.
    """
    problem.require_vector("momentum_run")
    rng = Rng(0) if rng is None else rng
    x = problem.check_params(init).copy()
    k = x.shape[0]
    m = np.zeros_like(x)
    part = reclassify(x, problem)
    trace = RunTrace(history=[] if cfg.record_history else None)

    def group_grads(params, partition):
        sizes = partition.sizes()
        g = np.zeros_like(params)
        for j in range(k):
            if sizes[j]:
                _, g[j] = problem.group_value_grad(params[j], partition.members(j))
        gn = float(np.sum(sizes * np.sum(g * g, axis=1))) / problem.n
        return g, gn, sizes

    _, gn, sizes = group_grads(x, part)
    trace.append(0, float(problem.value_matrix(x).min(axis=1).mean()), gn, sizes)

    for t in range(cfg.max_iters):
        x_new = x - cfg.gamma * m
        u = None
        if t % cfg.r == 0:
            u = (x_new - cfg.beta * x) / (1 - cfg.beta)
            new_part = controlled_reclassify(part, u, problem, cfg.alpha, rng)
            assert satisfies_size_control(part, new_part, cfg.alpha)
        else:
            new_part = part
        g, gn, sizes = group_grads(x_new, new_part)
        if trace.history is not None:
            trace.history.append({"t": t, "x": x.copy(), "m": m.copy(),
                                  "x_next": x_new.copy(), "u": None if u is None else u.copy()})
        m = cfg.beta * m + g
        x, part = x_new, new_part
        trace.append(t + 1, float(problem.value_matrix(x).min(axis=1).mean()), gn, sizes)
    trace.stop_reason = "max_iters"
    return RunResult(x, part, trace)
