import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from summin import (
    InvalidInputError,
    OracleProblem,
    Partition,
    QuadraticProblem,
    RidgeProblem,
    RunTrace,
    SubFunctionOracle,
    UnsupportedConfigurationError,
    UnsupportedOracleError,
    averaged_optimality_gap,
    evaluate_objective,
    group_objective,
    reclassify,
)
from summin.core import partition_objective, weighted_grad_norm
from summin.models import GpcaProblem
from summin.rng import Rng


def quad(*points):
    return QuadraticProblem(np.asarray(points, dtype=float).reshape(len(points), -1))


def test_evaluate_objective_examples():
    assert evaluate_objective([[0.0]], quad(0.0)) == 0.0
    assert evaluate_objective([[1.0], [-1.0]], quad(1.0, -1.0)) == 0.0
    assert evaluate_objective([[1.0]], quad(0, 1, 2)) == pytest.approx(1 / 3, abs=1e-15)


def test_evaluate_objective_rejects_bad_dimension():
    with pytest.raises(InvalidInputError):
        evaluate_objective([[0.0, 1.0]], quad(0, 1))


def test_reclassify_examples():
    assert reclassify([[0.0], [2.0]], quad(0, 2)).assignment.tolist() == [0, 1]
    assert reclassify([[1.0], [1.0]], quad(0, 2, 5)).assignment.tolist() == [0, 0, 0]
    # f_2 is equidistant from both centres; lowest index wins
    assert reclassify([[0.0], [2.0]], quad(0, 1, 2)).assignment.tolist() == [0, 0, 1]


def test_group_objective_examples():
    p = quad(0, 2)
    part = Partition(np.array([0, 0]), 2)
    val, grad = group_objective(part, 1, [[0.0], [5.0]], p)
    assert val == 0.0 and np.array_equal(grad, [0.0])
    val, grad = group_objective(part, 0, [[0.0], [5.0]], p)
    assert val == pytest.approx(1.0) and grad == pytest.approx([-1.0])
    val, grad = group_objective(Partition(np.array([0]), 1), 0, [[0.0]], quad(1.0))
    assert val == pytest.approx(0.5) and grad == pytest.approx([-1.0])


def test_group_objective_rejects_frames():
    y = np.eye(3)
    p = GpcaProblem(y, 1)
    with pytest.raises(UnsupportedConfigurationError):
        group_objective(Partition(np.zeros(3, int), 1), 0, np.eye(3)[None, :, :1], p)


def test_averaged_gap_examples():
    p = quad(0, 1, 2)
    assert averaged_optimality_gap([[1.0]], p) == pytest.approx(1 / 3)
    assert averaged_optimality_gap([[0.0], [1.0], [2.0]], p) == 0.0
    # k-means quadratics: gap equals the objective
    x = [[0.3], [1.7]]
    assert averaged_optimality_gap(x, p) == evaluate_objective(x, p)


def test_averaged_gap_needs_opt_values():
    oracles = [SubFunctionOracle(lambda x: float(x @ x))]
    with pytest.raises(UnsupportedOracleError):
        averaged_optimality_gap([[0.0]], OracleProblem(oracles, 1))


def test_oracle_problem_roundtrip():
    centres = [np.array([0.0, 1.0]), np.array([2.0, -1.0])]
    oracles = [SubFunctionOracle(lambda x, c=c: 0.5 * float((x - c) @ (x - c)),
                                 gradient=lambda x, c=c: x - c, minimizer=c, opt_value=0.0)
               for c in centres]
    op = OracleProblem(oracles, 2, L=1.0, mu=1.0)
    qp = QuadraticProblem(np.array(centres))
    x = np.array([[0.5, 0.5], [1.0, 0.0]])
    assert evaluate_objective(x, op) == pytest.approx(evaluate_objective(x, qp), abs=1e-15)
    assert np.allclose(op.gradients(x[0]), qp.gradients(x[0]))
    assert np.array_equal(op.minimizer(1), centres[1])


def test_partition_validation():
    with pytest.raises(InvalidInputError):
        Partition(np.array([0, 2]), 2)
    p = Partition(np.array([1, 0, 1]), 3)
    assert p.sizes().tolist() == [1, 2, 0]
    assert p.members(1).tolist() == [0, 2]


def test_trace_requires_increasing_iterations():
    tr = RunTrace()
    tr.append(0, 1.0, 0.0, [1])
    tr.append(2, 0.5, 0.0, [1])
    with pytest.raises(InvalidInputError):
        tr.append(2, 0.4, 0.0, [1])


vec_sets = st.integers(1, 4).flatmap(
    lambda k: arrays(np.float64, (k, 2), elements=st.floats(-5, 5)))


@given(vec_sets, st.integers(0, 10_000))
@settings(max_examples=60, deadline=None)
def test_objective_equals_partition_form(params, seed):
    rng = Rng(seed)
    p = RidgeProblem(rng.normal((15, 2)), rng.normal(15), 0.1)
    part = reclassify(params, p)
    assert partition_objective(params, part, p) == pytest.approx(
        evaluate_objective(params, p), abs=1e-12)


@given(vec_sets, st.integers(0, 10_000))
@settings(max_examples=40, deadline=None)
def test_reclassify_permutation_invariance(params, seed):
    rng = Rng(seed)
    pts = rng.normal((12, 2))
    perm = rng.permutation(12)
    a = reclassify(params, QuadraticProblem(pts)).assignment
    b = reclassify(params, QuadraticProblem(pts[perm])).assignment
    assert np.array_equal(a[perm], b)


@given(vec_sets, st.integers(0, 10_000))
@settings(max_examples=40, deadline=None)
def test_gap_nonnegative(params, seed):
    rng = Rng(seed)
    p = RidgeProblem(rng.normal((10, 2)), rng.normal(10), 0.5)
    assert averaged_optimality_gap(params, p) >= -1e-12


def fd_grad(f, x, h):
    g = np.zeros_like(x)
    for c in range(x.size):
        e = np.zeros_like(x)
        e[c] = h
        g[c] = (f(x + e) - f(x - e)) / (2 * h)
    return g


@pytest.mark.parametrize("seed", range(5))
def test_ridge_gradients_match_finite_differences(seed):
    rng = Rng(seed)
    p = RidgeProblem(rng.normal((6, 3)), rng.normal(6), 0.2)
    x = rng.normal(3)
    h = 1e-6 * (1 + np.linalg.norm(x))
    g = p.gradients(x)
    for i in range(p.n):
        num = fd_grad(lambda z: p.values(z, [i])[0], x, h)
        assert np.linalg.norm(num - g[i]) <= 1e-5 * max(1.0, np.linalg.norm(g[i]))


def test_weighted_grad_norm_matches_definition():
    p = quad(0, 1, 4)
    x = np.array([[0.0], [3.0]])
    part = reclassify(x, p)
    # cluster 0 = {0, 1} grad -0.5; cluster 1 = {4} grad -1
    assert weighted_grad_norm(x, part, p) == pytest.approx((2 * 0.25 + 1 * 1.0) / 3)
