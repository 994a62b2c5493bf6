"""Sum-of-minimum objective, reclassification and group objectives.

A problem holds ``N`` sub-functions ``f_i`` over a common parameter space.  A
parameter set is an array whose leading axis indexes the ``k`` candidates:
shape ``(k, d)`` for vectors, ``(k, d, r)`` for orthonormal frames.

Cluster ids are 0-based throughout.  Ties are compared exactly (no epsilon)
and always go to the smallest cluster id.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np


class SumMinError(Exception):
    """Base class for errors raised by this package."""


class InvalidInputError(SumMinError, ValueError):
    pass


class UnsupportedOracleError(SumMinError):
    """The problem lacks a capability (f*, minimizer, gradient...) an operation needs."""


class DegenerateInstanceError(SumMinError):
    pass


class InvalidConfigurationError(SumMinError, ValueError):
    pass


class UnsupportedConfigurationError(SumMinError):
    pass


@dataclass(frozen=True)
class SubFunctionOracle:
    """One sub-function ``f_i``: value, gradient and optional minimizer / optimal value."""

    value: Callable[[np.ndarray], float]
    gradient: Optional[Callable[[np.ndarray], np.ndarray]] = None
    minimizer: Optional[np.ndarray] = None
    opt_value: Optional[float] = None


@dataclass
class Partition:
    """Assignment of each index in ``[N]`` to one of ``k`` clusters (possibly empty)."""

    assignment: np.ndarray
    k: int

    def __post_init__(self):
        self.assignment = np.asarray(self.assignment, dtype=np.int64)
        if self.k < 1:
            raise InvalidInputError("k must be positive")
        if self.assignment.ndim != 1:
            raise InvalidInputError("assignment must be 1-D")
        if self.assignment.size and (self.assignment.min() < 0 or self.assignment.max() >= self.k):
            raise InvalidInputError("cluster id out of range")

    @property
    def n(self) -> int:
        return self.assignment.size

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.k)

    def members(self, j: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == j)

    def copy(self) -> "Partition":
        return Partition(self.assignment.copy(), self.k)

    def __eq__(self, other):
        if not isinstance(other, Partition):
            return NotImplemented
        return self.k == other.k and np.array_equal(self.assignment, other.assignment)


@dataclass
class TraceRecord:
    t: int
    objective: float
    grad_norm_sq: float  # sum_j |C_j|/N * ||grad F_j(x_j)||^2
    sizes: tuple
    wall_time: float


@dataclass
class RunTrace:
    records: list = field(default_factory=list)
    stop_reason: str = ""
    history: Optional[list] = None
    _t0: float = field(default_factory=time.perf_counter, repr=False)

    def append(self, t, objective, grad_norm_sq, sizes):
        if self.records and t <= self.records[-1].t:
            raise InvalidInputError("trace iterations must be strictly increasing")
        self.records.append(
            TraceRecord(int(t), float(objective), float(grad_norm_sq),
                        tuple(int(s) for s in sizes), time.perf_counter() - self._t0)
        )

    def __len__(self):
        return len(self.records)

    @property
    def objectives(self) -> np.ndarray:
        return np.array([r.objective for r in self.records])

    @property
    def grad_norms(self) -> np.ndarray:
        return np.array([r.grad_norm_sq for r in self.records])

    @property
    def iterations(self) -> np.ndarray:
        return np.array([r.t for r in self.records])


class Problem:
    """Collection of ``N`` sub-functions sharing one parameter space.

    Subclasses implement the vectorised hooks :meth:`values` and, where the
    family supports them, :meth:`gradients`, :meth:`minimizer`,
    :meth:`opt_values` and :meth:`group_minimizer`.
    """

    n: int
    param_shape: tuple
    L: Optional[float] = None
    mu: Optional[float] = None
    is_frame: bool = False

    def _check_constants(self):
        if self.n < 1:
            raise InvalidInputError("a problem needs at least one sub-function")
        if self.L is not None and self.mu is not None and not 0 < self.mu <= self.L:
            raise InvalidInputError(f"need 0 < mu <= L, got mu={self.mu}, L={self.L}")

    # --- required ---------------------------------------------------------
    def values(self, x: np.ndarray, idx=None) -> np.ndarray:
        """``f_i(x)`` for every ``i`` in ``idx`` (all indices by default)."""
        raise NotImplementedError

    # --- optional capabilities ---------------------------------------------
    def gradients(self, x: np.ndarray, idx=None) -> np.ndarray:
        raise UnsupportedOracleError(f"{type(self).__name__} has no gradient oracle")

    def minimizer(self, i: int) -> np.ndarray:
        raise UnsupportedOracleError(f"{type(self).__name__} has no minimizer oracle")

    def opt_values(self) -> np.ndarray:
        raise UnsupportedOracleError(f"{type(self).__name__} does not know f_i^*")

    def group_minimizer(self, idx) -> np.ndarray:
        raise UnsupportedOracleError(f"{type(self).__name__} has no group minimizer")

    # --- derived ------------------------------------------------------------
    def has_opt_values(self) -> bool:
        try:
            self.opt_values()
        except UnsupportedOracleError:
            return False
        return True

    def minimizers(self, idx=None) -> np.ndarray:
        idx = range(self.n) if idx is None else idx
        return np.stack([self.minimizer(int(i)) for i in idx])

    def value_matrix(self, params: np.ndarray, idx=None) -> np.ndarray:
        """``(N, k)`` matrix of ``f_i(x_j)``."""
        params = self.check_params(params)
        return np.stack([self.values(x, idx) for x in params], axis=1)

    def group_value_grad(self, x: np.ndarray, idx) -> tuple[float, np.ndarray]:
        idx = np.asarray(idx, dtype=np.int64)
        if idx.size == 0:
            return 0.0, np.zeros(self.param_shape)
        return float(np.mean(self.values(x, idx))), self.gradients(x, idx).mean(axis=0)

    def oracle(self, i: int) -> SubFunctionOracle:
        """Per-index view of sub-function ``i``."""
        i = int(i)
        sel = np.array([i])
        try:
            xstar = self.minimizer(i)
        except UnsupportedOracleError:
            xstar = None
        fstar = float(self.opt_values()[i]) if self.has_opt_values() else None
        grad = None
        if not self.is_frame:
            grad = lambda x: self.gradients(np.asarray(x, dtype=float), sel)[0]  # noqa: E731
        return SubFunctionOracle(
            value=lambda x: float(self.values(np.asarray(x, dtype=float), sel)[0]),
            gradient=grad,
            minimizer=xstar,
            opt_value=fstar,
        )

    def check_params(self, params) -> np.ndarray:
        params = np.asarray(params, dtype=np.float64)
        if params.ndim == len(self.param_shape):
            params = params[None]
        if params.shape[1:] != tuple(self.param_shape):
            raise InvalidInputError(
                f"parameter shape {params.shape[1:]} does not match problem {self.param_shape}"
            )
        if params.shape[0] < 1:
            raise InvalidInputError("need at least one parameter")
        if not np.all(np.isfinite(params)):
            raise InvalidInputError("parameters must be finite")
        return params

    def require_vector(self, what: str):
        if self.is_frame:
            raise UnsupportedConfigurationError(f"{what} requires vector parameters")


class OracleProblem(Problem):
    """Problem assembled from a sequence of independent :class:`SubFunctionOracle`."""

    def __init__(self, oracles: Sequence[SubFunctionOracle], dim: int, L=None, mu=None,
                 group_solver: Optional[Callable] = None):
        self.oracles = list(oracles)
        self.n = len(self.oracles)
        self.param_shape = (int(dim),)
        self.L, self.mu = L, mu
        self._group_solver = group_solver
        self._check_constants()

    def values(self, x, idx=None):
        idx = range(self.n) if idx is None else idx
        return np.array([self.oracles[int(i)].value(x) for i in idx], dtype=float)

    def gradients(self, x, idx=None):
        idx = range(self.n) if idx is None else idx
        out = []
        for i in idx:
            g = self.oracles[int(i)].gradient
            if g is None:
                raise UnsupportedOracleError(f"oracle {i} has no gradient")
            out.append(np.asarray(g(x), dtype=float))
        return np.stack(out).reshape(len(out), *self.param_shape)

    def minimizer(self, i):
        xs = self.oracles[int(i)].minimizer
        if xs is None:
            raise UnsupportedOracleError(f"oracle {i} has no minimizer")
        return np.asarray(xs, dtype=float)

    def opt_values(self):
        vals = [o.opt_value for o in self.oracles]
        if any(v is None for v in vals):
            raise UnsupportedOracleError("some oracle lacks opt_value")
        return np.array(vals, dtype=float)

    def group_minimizer(self, idx):
        if self._group_solver is None:
            raise UnsupportedOracleError("no group solver registered")
        return np.asarray(self._group_solver(np.asarray(idx, dtype=np.int64)), dtype=float)

    def oracle(self, i):
        return self.oracles[int(i)]


def evaluate_objective(params, problem: Problem) -> float:
    """``F(x_1..x_k) = (1/N) sum_i min_j f_i(x_j)``."""
    return float(problem.value_matrix(params).min(axis=1).mean())


def reclassify(params, problem: Problem) -> Partition:
    """Assign each index to the lowest-numbered cluster attaining ``min_j f_i(x_j)``."""
    vm = problem.value_matrix(params)
    # argmin returns the first minimal column, which is the required tie-break
    return Partition(np.argmin(vm, axis=1), vm.shape[1])


def partition_objective(params, partition: Partition, problem: Problem) -> float:
    """``(1/N) sum_j sum_{i in C_j} f_i(x_j)`` for an arbitrary partition."""
    params = problem.check_params(params)
    total = 0.0
    for j in range(partition.k):
        idx = partition.members(j)
        if idx.size:
            total += problem.values(params[j], idx).sum()
    return float(total / problem.n)


def group_objective(partition: Partition, j: int, params, problem: Problem):
    """Value and gradient of ``F_j(x_j)``; ``(0, 0)`` for an empty cluster."""
    if not 0 <= j < partition.k:
        raise InvalidInputError(f"cluster id {j} outside [0, {partition.k})")
    params = problem.check_params(params)
    problem.require_vector("group_objective")
    return problem.group_value_grad(params[j], partition.members(j))


def weighted_grad_norm(params, partition: Partition, problem: Problem) -> float:
    """``sum_j |C_j|/N * ||grad F_j(x_j)||^2``."""
    params = problem.check_params(params)
    total = 0.0
    for j in range(partition.k):
        idx = partition.members(j)
        if idx.size:
            _, g = problem.group_value_grad(params[j], idx)
            total += idx.size * float(np.sum(g * g))
    return total / problem.n


def mean_opt_value(problem: Problem) -> float:
    return float(np.mean(problem.opt_values()))


def averaged_optimality_gap(params, problem: Problem) -> float:
    """``F(params) - (1/N) sum_i f_i^*``."""
    return evaluate_objective(params, problem) - mean_opt_value(problem)
