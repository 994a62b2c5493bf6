import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from summin import (
    DegenerateInstanceError,
    InvalidInputError,
    QuadraticProblem,
    RidgeProblem,
    evaluate_objective,
)
from summin.diagnostics import (
    additive_noise_ceiling,
    brute_force_optimum,
    build_lower_bound_instance,
    delta_C,
    gap_A,
    grad_D,
    grad_norm_ceiling,
    init_bound_experiment,
    init_ceiling,
    scaled_oracle_ceiling,
    simplex_vertices,
)
from summin.rng import Rng


def line(*pts):
    return QuadraticProblem(np.array(pts, dtype=float)[:, None])


def test_delta_C():
    p = line(0, 2, 5)
    assert delta_C([0], p) == 0.0
    assert delta_C([0, 1], p) == 4.0
    shifted = line(10, 12, 15)
    assert delta_C([0, 1, 2], p) == delta_C([0, 1, 2], shifted)
    with pytest.raises(InvalidInputError):
        delta_C([], p)


def test_gap_and_grad_at_minimizers():
    rng = Rng(1)
    p = RidgeProblem(rng.normal((6, 2)), rng.normal(6), 0.1)
    M = p.minimizers()
    assert gap_A(range(6), M, p) == pytest.approx(0, abs=1e-14)
    assert grad_D(range(6), M, p) == pytest.approx(0, abs=1e-20)


@given(st.integers(0, 10_000))
@settings(max_examples=50, deadline=None)
def test_sandwich_and_additivity(seed):
    rng = Rng(seed)
    p = RidgeProblem(rng.normal((8, 3)), rng.normal(8), 0.2)
    pts = rng.normal((2, 3))
    idx = list(range(8))
    A, D = gap_A(idx, pts, p), grad_D(idx, pts, p)
    assert D / (2 * p.L) <= A * (1 + 1e-10) + 1e-12
    assert A <= D / (2 * p.mu) * (1 + 1e-10) + 1e-12
    assert gap_A(idx[:3], pts, p) + gap_A(idx[3:], pts, p) == pytest.approx(A, rel=1e-12)


def exhaustive_optimum(problem, k):
    """Enumerate all k^N labelled assignments (independent of the subset DP)."""
    best = math.inf
    for labels in itertools.product(range(k), repeat=problem.n):
        labels = np.array(labels)
        total = 0.0
        for j in range(k):
            idx = np.flatnonzero(labels == j)
            if idx.size:
                total += problem.values(problem.group_minimizer(idx), idx).sum()
        best = min(best, total / problem.n)
    return best


def test_brute_force_examples():
    F, part = brute_force_optimum(line(0, 1, 10, 11), 2)
    assert F == pytest.approx(0.125, abs=1e-15)
    assert part.assignment[0] == part.assignment[1] != part.assignment[2] == part.assignment[3]
    assert brute_force_optimum(line(0, 3, 8), 3)[0] == 0.0
    p = RidgeProblem(Rng(2).normal((3, 2)), Rng(3).normal(3), 0.1)
    assert brute_force_optimum(p, 5)[0] == pytest.approx(p.opt_values().mean())


@pytest.mark.parametrize("seed", range(4))
def test_brute_force_matches_exhaustive_enumeration(seed):
    rng = Rng(seed)
    p = RidgeProblem(rng.normal((7, 2)), rng.normal(7), 0.05)
    F, part = brute_force_optimum(p, 3)
    assert F == pytest.approx(exhaustive_optimum(p, 3), abs=1e-12)
    params = np.stack([p.group_minimizer(part.members(j)) if part.sizes()[j]
                       else np.zeros(2) for j in range(3)])
    assert evaluate_objective(params, p) <= F + 1e-12


@given(st.integers(0, 10_000))
@settings(max_examples=20, deadline=None)
def test_brute_force_is_lower_bound(seed):
    rng = Rng(seed)
    p = QuadraticProblem(rng.normal((8, 2)))
    F, _ = brute_force_optimum(p, 2)
    for _ in range(100):
        assert F <= evaluate_objective(rng.normal((2, 2)), p) + 1e-12


def test_brute_force_size_cap():
    with pytest.raises(InvalidInputError):
        brute_force_optimum(QuadraticProblem(np.zeros((13, 1)) + np.arange(13)[:, None]), 2)


def test_simplex_vertices_edge():
    V = simplex_vertices(4, 3.0)
    assert np.allclose(V.sum(axis=0), 0)
    for a, b in itertools.combinations(range(4), 2):
        assert np.linalg.norm(V[a] - V[b]) == pytest.approx(3.0)


def test_lower_bound_instance_structure():
    p = build_lower_bound_instance(3, 4, 100.0, 10.0, 1.0)
    assert p.n == 15 and p.param_shape == (6,)
    assert p.L == 10.0 and p.mu == 1.0
    assert np.all(p.opt_values() == 0)
    for l in range(3):
        idx = np.flatnonzero(p.clusters == l)
        mins = p.minimizers(idx)
        assert np.linalg.norm(mins[0] - mins[-1]) == pytest.approx(2.0)
        assert np.allclose(mins[:-1], mins[0])
    # the closed-form gap agrees with evaluating the per-cluster minimizers
    assert evaluate_objective(p.optimal_params(), p) == pytest.approx(p.optimal_gap(), rel=1e-12)
    with pytest.raises(InvalidInputError):
        build_lower_bound_instance(3, 4, 1e7, 10.0, 1.0)


def test_ceilings():
    assert init_ceiling(5, 1.0, 1.0) == pytest.approx(8 * (2 + math.log(5)))
    assert init_ceiling(3, 4.0, 2.0) == pytest.approx(4 * (2 + math.log(3)) * 6)
    assert scaled_oracle_ceiling(3, 2.0, 1.0, 1.0, 1.0) == pytest.approx(init_ceiling(3, 2.0, 1.0))
    assert grad_norm_ceiling(2, 1.0, 1.0) == pytest.approx(init_ceiling(2, 1.0, 1.0))
    assert additive_noise_ceiling(2, 1.0, 1.0, 0.0, 0.3) == pytest.approx(
        init_ceiling(2, 1.0, 1.0) * 0.3)


def test_init_bound_experiment():
    p = line(0, 1, 10, 11, 20, 22)
    stats = init_bound_experiment(p, 3, 300, rng=Rng(4))
    assert stats.ratios.size == 300 and np.all(stats.ratios >= 1 - 1e-12)
    assert stats.within_ceiling
    assert stats.lower99 <= stats.mean <= stats.upper99
    with pytest.raises(DegenerateInstanceError):
        init_bound_experiment(line(0, 1, 2), 3, 5, rng=Rng(0))
