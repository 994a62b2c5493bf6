"""Theory-facing quantities and empirical checks of the seeding / convergence bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import (
    DegenerateInstanceError,
    InvalidInputError,
    Partition,
    Problem,
    RunTrace,
    averaged_optimality_gap,
    mean_opt_value,
)
from .models import DiagQuadraticProblem
from .rng import Rng
from .seeding import ExactGap, ScoreMode, careful_seed

BRUTE_FORCE_MAX_ASSIGNMENTS = 10**7
BRUTE_FORCE_MAX_N = 12
Z99 = 2.3263478740408408  # one-sided 99% normal quantile


def _nonempty(indices) -> np.ndarray:
    idx = np.asarray(indices, dtype=np.int64).reshape(-1)
    if idx.size == 0:
        raise InvalidInputError("index set must be non-empty")
    return idx


def delta_C(indices, problem: Problem) -> float:
    """``(1/|C|) sum_{i, i' in C} ||x_i^* - x_i'^*||^2``."""
    idx = _nonempty(indices)
    X = problem.minimizers(idx).reshape(idx.size, -1)
    diff = X[:, None, :] - X[None, :, :]
    return float(np.sum(diff * diff) / idx.size)


def gap_A(indices, point_set, problem: Problem) -> float:
    """``sum_{i in I} min_{z in M} (f_i(z) - f_i^*)``."""
    idx = _nonempty(indices)
    pts = problem.check_params(point_set)
    vm = problem.value_matrix(pts)[idx]
    return float(np.sum(vm.min(axis=1) - problem.opt_values()[idx]))


def grad_D(indices, point_set, problem: Problem) -> float:
    """``sum_{i in I} min_{z in M} ||grad f_i(z)||^2``."""
    idx = _nonempty(indices)
    pts = problem.check_params(point_set)
    sq = np.stack([np.sum(problem.gradients(z, idx) ** 2, axis=1) for z in pts], axis=1)
    return float(np.sum(sq.min(axis=1)))


def brute_force_optimum(problem: Problem, k: int):
    """Global optimum ``F*`` and an optimal partition by exhaustive search.

    Every subset's cost is evaluated at its exact group minimizer; the best
    split of ``[N]`` into at most ``k`` labelled groups is then found by a
    dynamic programme over subsets.
    """
    n = problem.n
    if k < 1:
        raise InvalidInputError("k must be positive")
    if k >= n:
        return float(mean_opt_value(problem)), Partition(np.arange(n), k)
    if n > BRUTE_FORCE_MAX_N or k**n > BRUTE_FORCE_MAX_ASSIGNMENTS:
        raise InvalidInputError(
            f"instance too large for exhaustive search (N={n}, k={k})")
    full = (1 << n) - 1
    cost = np.zeros(full + 1)
    for mask in range(1, full + 1):
        idx = [i for i in range(n) if mask >> i & 1]
        x = problem.group_minimizer(idx)
        cost[mask] = problem.values(x, idx).sum()

    best = cost.copy()  # one group
    choices = []
    for _ in range(1, k):
        nxt = best.copy()  # the extra group stays empty
        pick = np.zeros(full + 1, dtype=np.int64)
        for mask in range(1, full + 1):
            low = mask & -mask
            rest = mask ^ low
            sub = rest
            while True:
                s = sub | low
                val = cost[s] + best[mask ^ s]
                if val < nxt[mask]:
                    nxt[mask] = val
                    pick[mask] = s
                if sub == 0:
                    break
                sub = (sub - 1) & rest
        choices.append(pick)
        best = nxt

    assign = np.zeros(n, dtype=np.int64)
    mask = full
    for j in range(k - 1, 0, -1):
        s = int(choices[j - 1][mask])
        for i in range(n):
            if s >> i & 1:
                assign[i] = j
        mask ^= s
    return float(best[full] / n), Partition(assign, k)


# ---------------------------------------------------------------------------
# lower-bound construction


class LowerBoundProblem(DiagQuadraticProblem):
    """Simplex-of-clusters instance on which careful seeding pays ``~ (L/mu)^2 ln k``.

    ``clusters[i]`` is the simplex vertex sub-function ``i`` belongs to.
    """

    def __init__(self, centers, curvatures, clusters, k, n_copies, L, mu, m):
        super().__init__(centers, curvatures)
        self.clusters = clusters
        self.k_clusters = k
        self.n_copies = n_copies
        self.edge = m
        self.L_param, self.mu_param = L, mu

    def optimal_gap(self) -> float:
        """``F* - f*`` when each vertex cluster is served by one parameter."""
        n, L, mu = self.n_copies, self.L_param, self.mu_param
        return self.k_clusters * 2 * n * L * mu / (n * L + mu) / self.n

    def optimal_params(self) -> np.ndarray:
        return np.stack([self.group_minimizer(np.flatnonzero(self.clusters == l))
                         for l in range(self.k_clusters)])


def simplex_vertices(k: int, edge: float) -> np.ndarray:
    """``k`` vertices in ``R^k`` centred at the origin with pairwise distance ``edge``."""
    return edge / math.sqrt(2) * (np.eye(k) - 1.0 / k)


def build_lower_bound_instance(k: int, n: int, m: float, L: float, mu: float) -> LowerBoundProblem:
    """``N = k (n+1)`` quadratics in ``R^{2k}``.

    Cluster ``l`` sits at simplex vertex ``xi_l`` (edge ``m``) and holds ``n``
    copies with curvature ``mu`` except ``L`` on axis ``k+l`` (minimizer
    ``[xi_l; -e_l]``) plus one flipped copy (``L`` except ``mu`` on axis
    ``k+l``, minimizer ``[xi_l; e_l]``).
    """
    if k < 2 or n < 1:
        raise InvalidInputError("need k >= 2 and n >= 1")
    if not 0 < mu <= L:
        raise InvalidInputError("need 0 < mu <= L")
    if not (math.isfinite(m) and 0 < m <= 1e6) or L * m * m > 1e200:
        raise InvalidInputError(f"edge length m={m} risks overflow; use m <= 1e6")
    xi = simplex_vertices(k, m)
    centers, curv, clusters = [], [], []
    for l in range(k):
        e = np.zeros(k)
        e[l] = 1.0
        h_main = np.full(2 * k, float(mu))
        h_main[k + l] = L
        h_flip = np.full(2 * k, float(L))
        h_flip[k + l] = mu
        for _ in range(n):
            centers.append(np.concatenate([xi[l], -e]))
            curv.append(h_main)
            clusters.append(l)
        centers.append(np.concatenate([xi[l], e]))
        curv.append(h_flip)
        clusters.append(l)
    return LowerBoundProblem(np.array(centers), np.array(curv), np.array(clusters),
                             k, n, float(L), float(mu), float(m))


# ---------------------------------------------------------------------------
# theoretical ceilings


def init_ceiling(k: int, L: float, mu: float) -> float:
    """Expected-ratio ceiling for exact-gap seeding: ``4 (2 + ln k)(kappa^2 + kappa)``."""
    kappa = L / mu
    return 4 * (2 + math.log(k)) * (kappa**2 + kappa)


def init_lower_constant(k: int, L: float, mu: float) -> float:
    """Ratio achieved on the worst-case family in the ``m -> inf`` limit: ``kappa^2 ln(k) / 2``."""
    return 0.5 * (L / mu) ** 2 * math.log(k)


def additive_noise_ceiling(k: int, L: float, mu: float, epsilon: float, opt_gap: float) -> float:
    """Ceiling on ``E F(M_init) - f*`` (absolute, not a ratio) with additive score noise."""
    kappa = L / mu
    return (init_ceiling(k, L, mu) * opt_gap
            + epsilon * (1 + (2 + math.log(k)) * (1 + 4 * kappa)))


def scaled_oracle_ceiling(k: int, L: float, mu: float, c1: float, c2: float) -> float:
    kappa, c = L / mu, c2 / c1
    return 4 * (c * kappa + c * c * kappa * kappa) * (2 + math.log(k))


def grad_norm_ceiling(k: int, L: float, mu: float) -> float:
    """Ratio ceiling for squared-gradient-norm scores (``c1 = 2 mu, c2 = 2 L``)."""
    return scaled_oracle_ceiling(k, L, mu, 2 * mu, 2 * L)


@dataclass
class InitBoundStats:
    ratios: np.ndarray
    mean: float
    std: float
    stderr: float
    upper99: float
    lower99: float
    ceiling: Optional[float]
    quantiles: dict = field(default_factory=dict)

    @property
    def within_ceiling(self) -> bool:
        return self.ceiling is not None and self.upper99 <= self.ceiling


def summarize_ratios(ratios, ceiling=None) -> InitBoundStats:
    ratios = np.asarray(ratios, dtype=float)
    mean = float(ratios.mean())
    std = float(ratios.std(ddof=1)) if ratios.size > 1 else 0.0
    se = std / math.sqrt(ratios.size)
    qs = {q: float(np.quantile(ratios, q)) for q in (0.05, 0.5, 0.95)}
    return InitBoundStats(ratios, mean, std, se, mean + Z99 * se, mean - Z99 * se, ceiling, qs)


def init_bound_experiment(problem: Problem, k: int, trials: int,
                          mode: Optional[ScoreMode] = None, rng: Optional[Rng] = None,
                          F_star: Optional[float] = None) -> InitBoundStats:
    """Distribution of ``(F(M_init) - f*) / (F* - f*)`` over repeated seedings."""
    mode = ExactGap() if mode is None else mode
    rng = Rng(0) if rng is None else rng
    if F_star is None:
        F_star, _ = brute_force_optimum(problem, k)
    f_star = mean_opt_value(problem)
    denom = F_star - f_star
    if not denom > 0:
        raise DegenerateInstanceError("F* equals f*; the ratio is undefined")
    ratios = np.empty(trials)
    for t in range(trials):
        res = careful_seed(problem, k, mode, rng.spawn(t))
        ratios[t] = averaged_optimality_gap(res.params, problem) / denom
    ceiling = None
    if problem.L is not None and problem.mu is not None:
        ceiling = init_ceiling(k, problem.L, problem.mu)
    return summarize_ratios(ratios, ceiling)


# ---------------------------------------------------------------------------
# convergence-rate checks


@dataclass
class BoundCheck:
    lhs: float
    rhs: float

    @property
    def ok(self) -> bool:
        return self.lhs <= self.rhs


def lloyd_gd_bound_check(trace: RunTrace, L: float, f_star: float) -> BoundCheck:
    """Averaged weighted gradient norm over ``t = 0..T`` vs ``2L (F(x^0) - f*) / (T+1)``.

    Using ``f* <= F*`` in place of ``F*`` only loosens the right-hand side.
    """
    g = trace.grad_norms
    F0 = trace.records[0].objective
    return BoundCheck(float(g.mean()), 2 * L * (F0 - f_star) / g.size)


def momentum_bound_check(trace: RunTrace, gamma: float, beta: float, f_star: float) -> BoundCheck:
    """Average over ``t = 1..T`` vs ``2 (1-beta)/gamma * (F(x^0) - f*) / T``."""
    g = trace.grad_norms[1:]
    F0 = trace.records[0].objective
    T = g.size
    return BoundCheck(float(g.mean()), 2 * (1 - beta) / gamma * (F0 - f_star) / T)
