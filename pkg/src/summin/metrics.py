"""Clustering accuracy, regression success and loss metrics."""

from __future__ import annotations

import itertools

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import InvalidInputError, Partition
from .models import mlp_forward

BRUTE_FORCE_MAX_K = 8


def _labels(x):
    return x.assignment if isinstance(x, Partition) else np.asarray(x, dtype=np.int64)


def coincidence_matrix(predicted, truth, k: int) -> np.ndarray:
    pred, true = _labels(predicted), _labels(truth)
    if pred.shape != true.shape:
        raise InvalidInputError("predicted and true labels differ in length")
    if pred.size and (min(pred.min(), true.min()) < 0 or max(pred.max(), true.max()) >= k):
        raise InvalidInputError("labels must lie in [0, k)")
    C = np.zeros((k, k), dtype=np.int64)
    np.add.at(C, (pred, true), 1)
    return C


def cluster_accuracy(predicted, truth, k: int) -> float:
    """Best matching accuracy over all relabelings of the predicted clusters.

    Exhaustive over ``k!`` permutations for ``k <= 8``; optimal assignment
    on the coincidence matrix beyond that (same optimum).
    """
    C = coincidence_matrix(predicted, truth, k)
    n = C.sum()
    if n == 0:
        raise InvalidInputError("no labels")
    if k <= BRUTE_FORCE_MAX_K:
        rows = np.arange(k)
        best = max(C[rows, list(perm)].sum() for perm in itertools.permutations(range(k)))
    else:
        r, c = linear_sum_assignment(C, maximize=True)
        best = C[r, c].sum()
    return float(best / n)


def mlr_success(F_final: float, F_ground_truth: float) -> bool:
    """Exact ``<=`` comparison of the final objective against the ground truth's."""
    if not (np.isfinite(F_final) and np.isfinite(F_ground_truth)):
        raise InvalidInputError("objective values must be finite")
    return bool(F_final <= F_ground_truth)


def min_loss(inputs, targets, params, d_in: int, d_hidden: int) -> float:
    """``(1/N) sum_i min_j 1/2 (psi(a_i; theta_j) - b_i)^2`` (no regulariser)."""
    inputs = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    targets = np.asarray(targets, dtype=np.float64).reshape(-1)
    params = np.atleast_2d(np.asarray(params, dtype=np.float64))
    if inputs.shape[0] != targets.size:
        raise InvalidInputError("inputs and targets differ in length")
    res = np.stack([mlp_forward(th, inputs, d_in, d_hidden) for th in params], axis=1) - targets[:, None]
    return float(np.mean(np.min(0.5 * res * res, axis=1)))
