import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from summin import (
    ExactGap,
    InvalidConfigurationError,
    LloydConfig,
    MomentumConfig,
    Partition,
    QuadraticProblem,
    RidgeProblem,
    careful_seed,
    controlled_reclassify,
    gamma_bar,
    lloyd_run,
    momentum_run,
    reclassify,
)
from summin.core import mean_opt_value
from summin.diagnostics import momentum_bound_check
from summin.momentum import satisfies_size_control
from summin.rng import Rng


def test_gamma_bar_examples():
    assert gamma_bar(1.25, 0.5, 1.0) == pytest.approx(0.19365, abs=1e-4)
    assert gamma_bar(1.25, 0.5, 2.0) == gamma_bar(1.25, 0.5, 1.0) / 2
    assert gamma_bar(2.0, 1e-9, 1.0) == pytest.approx(0.5, rel=1e-6)
    with pytest.raises(InvalidConfigurationError):
        gamma_bar(2.0, 0.5, 1.0)
    with pytest.raises(InvalidConfigurationError):
        MomentumConfig(gamma=0.1, beta=0.9, alpha=1.25)


def test_first_iteration_does_not_move():
    pts = Rng(1).normal((20, 2))
    p = QuadraticProblem(pts)
    res = momentum_run(p, pts[:2], MomentumConfig(gamma=0.1, max_iters=3, record_history=True))
    h = res.trace.history
    assert np.array_equal(h[0]["x_next"], h[0]["x"])
    assert np.array_equal(h[0]["u"], h[0]["x"])


def test_trajectory_identities():
    rng = Rng(2)
    p = RidgeProblem(rng.normal((50, 3)), rng.normal(50), 0.01)
    cfg = MomentumConfig(gamma=gamma_bar(1.25, 0.5, p.L) / 2, max_iters=20, record_history=True)
    res = momentum_run(p, rng.normal((3, 3)), cfg, Rng(3))
    for h in res.trace.history:
        assert np.array_equal(h["x_next"], h["x"] - cfg.gamma * h["m"])
        assert np.allclose(h["u"] * (1 - cfg.beta) + cfg.beta * h["x"], h["x_next"], atol=1e-12)


def test_small_beta_large_alpha_matches_gradient_lloyd():
    pts = Rng(4).normal((30, 2))
    p = QuadraticProblem(pts)
    x0 = pts[:3]
    gamma, T = 0.3, 10
    # beta -> 0: m^(t) = grad, so x^(t+1) = x^(t) - gamma grad^(t-1) lags one step
    mom = momentum_run(p, x0, MomentumConfig(gamma=gamma, beta=1e-12, alpha=1e6, max_iters=T + 1),
                       Rng(0))
    plain = lloyd_run(p, x0, LloydConfig(update="gradient", gamma=gamma, max_iters=T))
    assert np.allclose(mom.params, plain.params, atol=1e-9)


def test_controlled_reclassify_unchanged_when_targets_agree():
    pts = Rng(5).normal((12, 2))
    p = QuadraticProblem(pts)
    x = pts[:3]
    part = reclassify(x, p)
    assert controlled_reclassify(part, x, p, 1.25, Rng(0)) == part


@pytest.mark.parametrize("seed", range(5))
def test_controlled_reclassify_unconstrained_equals_reclassify(seed):
    rng = Rng(seed)
    pts = rng.normal((25, 2))
    p = QuadraticProblem(pts)
    start = Partition(rng.integers(3, 25), 3)
    u = rng.normal((3, 2))
    assert controlled_reclassify(start, u, p, 25.0, rng) == reclassify(u, p)


def test_controlled_reclassify_size_ledger():
    # clusters (4, 4); everybody wants cluster 1 -> sizes may reach (3, 5), (2, 6) is below 8/3
    pts = np.array([[-1.0]] * 4 + [[1.0]] * 4)
    p = QuadraticProblem(pts)
    part = Partition(np.array([0] * 4 + [1] * 4), 2)
    new = controlled_reclassify(part, np.array([[-50.0], [1.0]]), p, 1.5, Rng(0))
    assert new.sizes().tolist() == [3, 5]
    assert satisfies_size_control(part, new, 1.5)


def test_empty_reference_cluster_may_grow():
    pts = np.array([[0.0]] * 4 + [[10.0]] * 4)
    p = QuadraticProblem(pts)
    part = Partition(np.zeros(8, dtype=int), 2)
    new = controlled_reclassify(part, np.array([[0.0], [10.0]]), p, 2.0, Rng(1))
    assert new.sizes()[1] > 0 and satisfies_size_control(part, new, 2.0)


@given(st.integers(0, 10_000), st.floats(1.05, 3.0))
@settings(max_examples=50, deadline=None)
def test_size_control_invariant(seed, alpha):
    rng = Rng(seed)
    p = QuadraticProblem(rng.normal((30, 2)))
    start = Partition(rng.integers(3, 30), 3)
    new = controlled_reclassify(start, rng.normal((3, 2)), p, alpha, rng)
    assert satisfies_size_control(start, new, alpha)


@pytest.mark.parametrize("seed", range(4))
def test_momentum_rate_bound(seed):
    rng = Rng(seed)
    p = RidgeProblem(rng.normal((100, 4)), rng.normal(100), 0.01)
    x0 = careful_seed(p, 3, ExactGap(), rng.substream("init")).params
    gamma = gamma_bar(1.25, 0.5, p.L) / 2
    res = momentum_run(p, x0, MomentumConfig(gamma=gamma, max_iters=100), rng.substream("m"))
    assert momentum_bound_check(res.trace, gamma, 0.5, mean_opt_value(p)).ok
