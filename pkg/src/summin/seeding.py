"""Initialisation strategies: Gaussian, uniform seeding and careful seeding.

Careful seeding generalises k-means++: the first index is uniform, every
later index ``i`` is drawn with probability proportional to a score ``v_i``
that measures how badly ``f_i`` is served by the parameters chosen so far.
The chosen parameters are the minimizers of the sampled sub-functions.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .core import (
    DegenerateInstanceError,
    InvalidConfigurationError,
    InvalidInputError,
    Problem,
    UnsupportedConfigurationError,
    UnsupportedOracleError,
)
from .rng import Rng

log = logging.getLogger(__name__)


class ScoreMode:
    """Base for score rules; subclasses implement :meth:`scores_at`."""

    def validate(self, problem: Problem) -> None:
        pass

    def scores_at(self, x: np.ndarray, problem: Problem) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class ExactGap(ScoreMode):
    """``v_i = f_i(x) - f_i^*``."""

    def validate(self, problem):
        problem.opt_values()

    def scores_at(self, x, problem):
        return problem.values(x) - problem.opt_values()


@dataclass(frozen=True)
class GradNorm(ScoreMode):
    """``v_i = ||grad f_i(x)||^2``; needs no knowledge of ``f_i^*``."""

    def validate(self, problem):
        problem.require_vector("GradNorm scores")

    def scores_at(self, x, problem):
        g = problem.gradients(x)
        return np.sum(g * g, axis=1)


@dataclass(frozen=True)
class AdditiveNoisy(ScoreMode):
    """``v_i = max(f_i(x) - est_i, 0)`` with ``|est_i - f_i^*| <= epsilon``.

    When ``estimates`` is omitted the worst upward shift ``f_i^* + epsilon`` is used.
    """

    epsilon: float = 0.0
    estimates: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self):
        if self.epsilon < 0:
            raise InvalidConfigurationError("epsilon must be non-negative")

    def opt_estimates(self, problem):
        if self.estimates is None:
            return problem.opt_values() + self.epsilon
        est = np.asarray(self.estimates, dtype=float)
        if est.shape != (problem.n,):
            raise InvalidInputError("one estimate per sub-function is required")
        return est

    def validate(self, problem):
        est = self.opt_estimates(problem)
        if problem.has_opt_values():
            err = np.max(np.abs(est - problem.opt_values()))
            if err > self.epsilon * (1 + 1e-12) + 1e-15:
                raise InvalidInputError(
                    f"estimates deviate from f* by {err:.3g} > epsilon={self.epsilon}")

    def scores_at(self, x, problem):
        return np.maximum(problem.values(x) - self.opt_estimates(problem), 0.0)


@dataclass(frozen=True)
class ScaledOracle(ScoreMode):
    """User oracle ``O(i, x)`` with ``c1 gap_i(x) <= O(i, x) <= c2 gap_i(x)``.

    ``oracle(x, problem)`` must return the vector of ``O(i, x)`` over all ``i``.
    """

    oracle: Callable[[np.ndarray, Problem], np.ndarray]
    c1: float = 1.0
    c2: float = 1.0

    def __post_init__(self):
        if not 0 < self.c1 <= self.c2:
            raise InvalidConfigurationError("ScaledOracle needs 0 < c1 <= c2")

    def scores_at(self, x, problem):
        s = np.asarray(self.oracle(x, problem), dtype=float)
        if s.shape != (problem.n,):
            raise InvalidInputError("oracle must return one score per sub-function")
        # tolerate round-off below zero, reject genuinely negative scores
        if np.any(s < -1e-12 * (1.0 + np.max(np.abs(s)))):
            raise InvalidInputError("oracle scores must be non-negative")
        return np.maximum(s, 0.0)


@dataclass
class InitResult:
    params: np.ndarray
    indices: np.ndarray
    scores: list = field(default_factory=list)  # v^(j) for rounds j = 2..k
    weights: list = field(default_factory=list)  # w^(j) for rounds j = 2..k


def _check_k(k: int):
    if int(k) < 1:
        raise InvalidInputError("k must be at least 1")


def init_random(problem: Problem, k: int, rng: Rng) -> np.ndarray:
    """``k`` i.i.d. standard Gaussian parameters."""
    _check_k(k)
    if problem.is_frame:
        raise UnsupportedConfigurationError("Gaussian initialisation needs vector parameters")
    return rng.normal((int(k), *problem.param_shape))


def init_uniform_seeding(problem: Problem, k: int, rng: Rng) -> InitResult:
    """Minimizers of ``k`` distinct uniformly sampled sub-functions."""
    _check_k(k)
    if problem.n < k:
        raise InvalidInputError(f"cannot pick {k} distinct indices from N={problem.n}")
    idx = rng.choice_without_replacement(problem.n, int(k))
    return InitResult(problem.minimizers(idx), idx)


def compute_scores(existing, problem: Problem, mode: ScoreMode) -> np.ndarray:
    """``v_i = min over existing parameters`` of the per-mode score."""
    existing = problem.check_params(existing)
    mode.validate(problem)
    v = np.full(problem.n, np.inf)
    for x in existing:
        np.minimum(v, mode.scores_at(x, problem), out=v)
    # exact gaps can dip below zero by round-off
    return np.maximum(v, 0.0)


def careful_seed(problem: Problem, k: int, mode: Optional[ScoreMode] = None,
                 rng: Optional[Rng] = None) -> InitResult:
    """Sequential score-proportional seeding.

    Raises :class:`DegenerateInstanceError` when every score vanishes in some
    round (fewer than ``k`` distinct minimizers reachable).
    """
    _check_k(k)
    mode = ExactGap() if mode is None else mode
    rng = Rng(0) if rng is None else rng
    k = int(k)
    if problem.n < 1:
        raise InvalidInputError("empty problem")
    mode.validate(problem)

    first = rng.integers(problem.n)
    indices = [first]
    params = [problem.minimizer(first)]
    v = np.maximum(mode.scores_at(params[0], problem), 0.0)
    result = InitResult(np.empty(0), np.empty(0, dtype=np.int64))
    for j in range(1, k):
        total = v.sum()
        if not total > 0:
            raise DegenerateInstanceError(
                f"all scores are zero in round {j + 1}; fewer than {k} separable minimizers")
        w = v / total
        result.scores.append(v.copy())
        result.weights.append(w)
        i = rng.weighted_choice(v)
        indices.append(i)
        params.append(problem.minimizer(i))
        if j + 1 < k:
            np.minimum(v, np.maximum(mode.scores_at(params[-1], problem), 0.0), out=v)
    result.params = np.stack(params)
    result.indices = np.asarray(indices, dtype=np.int64)
    return result


def check_separation(problem: Problem, k: int, radius: float) -> bool:
    """Best-effort test for k minimizers pairwise more than ``2 radius`` apart.

    Greedy farthest-point selection: ``True`` certifies the property, ``False``
    only means the greedy pass did not find such a set.
    """
    try:
        X = problem.minimizers().reshape(problem.n, -1)
    except UnsupportedOracleError:
        return False
    chosen = [0]
    dist = np.linalg.norm(X - X[0], axis=1)
    while len(chosen) < k:
        i = int(np.argmax(dist))
        if dist[i] <= 2 * radius:
            return False
        chosen.append(i)
        dist = np.minimum(dist, np.linalg.norm(X - X[i], axis=1))
    return True


def careful_seed_noisy(problem: Problem, k: int, mode: AdditiveNoisy, rng: Rng) -> InitResult:
    """Careful seeding with additive-noise scores plus a best-effort separation warning."""
    if problem.mu is not None and mode.epsilon > 0:
        radius = np.sqrt(2 * mode.epsilon / problem.mu)
        if not check_separation(problem, k, radius):
            msg = f"could not certify ({k}, {radius:.3g})-separation of the minimizers"
            log.warning(msg)
            warnings.warn(msg, RuntimeWarning, stacklevel=2)
    return careful_seed(problem, k, mode, rng)
