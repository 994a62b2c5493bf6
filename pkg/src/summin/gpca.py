"""Subspace clustering: sum-of-minimum Lloyd vs. sum-of-product block coordinate descent."""

from __future__ import annotations

import numpy as np

from .core import InvalidInputError, Partition, RunTrace, reclassify
from .lloyd import RunResult
from .models import GpcaProblem, bottom_eigenvectors, is_orthonormal


def _frames(frames, data, tol=1e-10):
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim == 2:
        frames = frames[None]
    data = np.atleast_2d(np.asarray(data, dtype=np.float64))
    if frames.shape[1] != data.shape[1]:
        raise InvalidInputError("frame and data dimensions differ")
    for A in frames:
        if not is_orthonormal(A, tol):
            raise InvalidInputError("frame columns are not orthonormal")
    return frames, data


def _sq_proj(frames, data):
    P = np.einsum("nd,kdr->nkr", data, frames)
    return np.sum(P * P, axis=2)  # (N, k) of ||y_i^T A_j||^2


def gpca_som_objective(frames, data) -> float:
    """``(1/N) sum_i min_j 1/2 ||y_i^T A_j||^2``."""
    frames, data = _frames(frames, data)
    return float(0.5 * _sq_proj(frames, data).min(axis=1).mean())


def gpca_sop_objective(frames, data) -> float:
    """``(1/N) sum_i prod_j ||y_i^T A_j||^2``."""
    frames, data = _frames(frames, data)
    return float(np.prod(_sq_proj(frames, data), axis=1).mean())


def gpca_assign(frames, data) -> Partition:
    """Nearest-subspace labels (lowest index on ties)."""
    frames, data = _frames(frames, data)
    sq = _sq_proj(frames, data)
    return Partition(np.argmin(sq, axis=1), frames.shape[0])


def gpca_lloyd(data, init_frames, max_iters: int = 50) -> RunResult:
    """Alternate nearest-subspace assignment and exact per-cluster eigen updates.

    Stops when the objective repeats exactly or after ``max_iters`` updates.
    Empty clusters keep their frame.
    """
    frames, data = _frames(init_frames, data)
    frames = frames.copy()
    problem = GpcaProblem(data, frames.shape[2])
    trace = RunTrace()
    prev = np.inf
    for t in range(max_iters + 1):
        vm = problem.value_matrix(frames)
        F = float(vm.min(axis=1).mean())
        part = Partition(np.argmin(vm, axis=1), frames.shape[0])
        trace.append(t, F, np.nan, part.sizes())
        if F == prev:
            trace.stop_reason = "stalled"
            break
        if t == max_iters:
            trace.stop_reason = "max_iters"
            break
        prev = F
        for j in range(frames.shape[0]):
            idx = part.members(j)
            if idx.size:
                frames[j] = problem.group_minimizer(idx)
    return RunResult(frames, reclassify(frames, problem), trace)


def bcd_weights(frames, data, j: int) -> np.ndarray:
    """``w_ij = prod_{l != j} ||y_i^T A_l||^2`` for the frames as currently stored."""
    sq = _sq_proj(np.asarray(frames), np.asarray(data))
    return np.prod(np.delete(sq, j, axis=1), axis=1)


def gpca_bcd(data, init_frames, iters: int = 50, trace: RunTrace | None = None) -> np.ndarray:
    """Block coordinate descent on the product objective.

    Frames are updated in place in order ``j = 1..k``, so block ``j`` sees the
    already-updated ``A_l`` for ``l < j`` and the previous ones for ``l > j``.
    """
    frames, data = _frames(init_frames, data)
    frames = frames.copy()
    k, _, r = frames.shape
    n = data.shape[0]
    for t in range(iters):
        for j in range(k):
            w = bcd_weights(frames, data, j)
            M = (data * w[:, None]).T @ data / n
            frames[j] = bottom_eigenvectors(M, r)
        if trace is not None:
            trace.append(t, gpca_sop_objective(frames, data), np.nan, gpca_assign(frames, data).sizes())
    return frames
