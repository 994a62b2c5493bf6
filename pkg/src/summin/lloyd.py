"""Generalized Lloyd's algorithm for sum-of-minimum problems."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .adam import AdamConfig, AdamState, adam_step
from .core import (
    InvalidConfigurationError,
    Partition,
    Problem,
    RunTrace,
    UnsupportedConfigurationError,
    UnsupportedOracleError,
)

UPDATE_MODES = ("gradient", "exact", "adam")


@dataclass(frozen=True)
class LloydConfig:
    """Settings for :func:`lloyd_run`.

    ``max_iters`` is ``T``: the trace covers ``x^(0..T)``, so at most ``T``
    updates are applied and the returned parameters are the last recorded.  With
    ``stop_on_stable_partition`` the run ends at the first refresh whose
    objective is not strictly below the previous refresh's.  ``target`` stops
    the run as soon as ``F(x^(t)) <= target``.
    """

    update: str = "gradient"
    gamma: Optional[float] = None
    r: int = 1
    max_iters: int = 100
    adam: AdamConfig = field(default_factory=AdamConfig)
    stop_on_stable_partition: bool = False
    target: Optional[float] = None

    def __post_init__(self):
        if self.update not in UPDATE_MODES:
            raise InvalidConfigurationError(f"update must be one of {UPDATE_MODES}")
        if self.update == "gradient" and not (self.gamma is not None and self.gamma > 0):
            raise InvalidConfigurationError("gradient mode needs a positive step size gamma")
        if self.r < 1:
            raise InvalidConfigurationError("reclassification period r must be >= 1")
        if self.max_iters < 0:
            raise InvalidConfigurationError("max_iters must be non-negative")


class RunResult(NamedTuple):
    params: np.ndarray
    partition: Partition
    trace: RunTrace


def _classify(problem: Problem, params):
    vm = problem.value_matrix(params)
    part = Partition(np.argmin(vm, axis=1), vm.shape[1])
    return part, float(vm.min(axis=1).mean())


def lloyd_run(problem: Problem, init, cfg: LloydConfig) -> RunResult:
    params = problem.check_params(init).copy()
    k = params.shape[0]
    if cfg.update in ("gradient", "adam") and problem.is_frame:
        raise UnsupportedConfigurationError(f"{cfg.update} updates need vector parameters")
    want_grads = not problem.is_frame
    states = [AdamState.zeros(problem.param_shape) for _ in range(k)]
    trace = RunTrace()
    part = None
    prev_refresh_F = np.inf

    for t in range(cfg.max_iters + 1):
        refresh = t % cfg.r == 0
        if refresh:
            part, F = _classify(problem, params)
        else:
            F = float(problem.value_matrix(params).min(axis=1).mean())
        sizes = part.sizes()
        grads = [None] * k
        gn = np.nan
        if want_grads:
            gn = 0.0
            for j in range(k):
                if sizes[j]:
                    _, grads[j] = problem.group_value_grad(params[j], part.members(j))
                    gn += sizes[j] * float(grads[j] @ grads[j])
            gn /= problem.n
        trace.append(t, F, gn, sizes)

        if cfg.target is not None and F <= cfg.target:
            trace.stop_reason = "target"
            break
        if cfg.stop_on_stable_partition and refresh:
            if not F < prev_refresh_F:
                trace.stop_reason = "stalled"
                break
            prev_refresh_F = F
        if t == cfg.max_iters:
            trace.stop_reason = "max_iters"
            break

        for j in range(k):
            if not sizes[j]:
                continue
            if cfg.update == "gradient":
                params[j] = params[j] - cfg.gamma * grads[j]
            elif cfg.update == "adam":
                states[j], step = adam_step(states[j], grads[j], cfg.adam)
                params[j] = params[j] + step
            else:
                try:
                    params[j] = problem.group_minimizer(part.members(j))
                except UnsupportedOracleError as exc:
                    raise UnsupportedConfigurationError(str(exc)) from exc

    final_part, _ = _classify(problem, params)
    return RunResult(params, final_part, trace)
