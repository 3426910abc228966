import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import bandit
from meritirl import envs
from meritirl.mdp import FiniteMdp, MdpError
from meritirl.oracles import check_contraction, check_improvement
from meritirl.soft import (
    SoftSolveError,
    policy_improvement,
    policy_performance,
    soft_bellman_operator,
    soft_policy_evaluation,
    soft_q_operator,
    soft_value_iteration,
)


def test_bandit_closed_form():
    sol = soft_value_iteration(bandit(2, 0.9), np.array([[0.0, 1.0]]), tol=1e-12)
    assert sol.v[0] == pytest.approx(math.log(1 + math.e) / 0.1, abs=1e-9)
    v = math.log(1 + math.e) / 0.1
    assert sol.q[0] == pytest.approx([0.9 * v, 1 + 0.9 * v], abs=1e-9)
    # published reference values are rounded in the fifth decimal
    assert sol.q[0] == pytest.approx([11.81934, 12.81934], abs=2e-5)
    assert sol.policy[0] == pytest.approx([0.26894, 0.73106], abs=1e-5)


def test_policy_method_agrees(rng):
    mdp = envs.random_mdp(6, 3, 0.9, rng)
    r = rng.standard_normal((6, 3))
    a = soft_value_iteration(mdp, r, tol=1e-12)
    b = soft_value_iteration(mdp, r, tol=1e-12, method="policy")
    assert np.allclose(a.q, b.q, atol=1e-9)


def test_constant_reward_uniform(rng):
    # action-independent dynamics, otherwise a constant reward still prefers some actions
    row = rng.dirichlet(np.ones(5), size=5)
    mdp = FiniteMdp(np.repeat(row[:, None, :], 3, axis=1), np.full(5, 0.2), 0.9)
    sol = soft_value_iteration(mdp, np.tile(rng.standard_normal((5, 1)), (1, 3)))
    assert np.allclose(sol.policy, 1 / 3, atol=1e-12)


def test_residual_postcondition(rng):
    mdp = envs.random_mdp(5, 3, 0.9, rng)
    r = rng.standard_normal((5, 3))
    tol = 1e-9
    sol = soft_value_iteration(mdp, r, tol=tol)
    assert np.max(np.abs(soft_bellman_operator(mdp, r, sol.v) - sol.v)) <= tol


def test_max_iter_error(rng):
    mdp = envs.random_mdp(5, 3, 0.99, rng)
    with pytest.raises(SoftSolveError):
        soft_value_iteration(mdp, rng.standard_normal((5, 3)), tol=1e-12, max_iter=3)


def test_operator_single_state():
    out = soft_bellman_operator(bandit(2, 0.0), np.array([[0.0, 1.0]]), np.zeros(1))
    assert out[0] == pytest.approx(1.313262, abs=1e-6)


def test_operator_constant_shift(rng):
    mdp = envs.random_mdp(5, 3, 0.8, rng)
    r = rng.standard_normal((5, 3))
    v = rng.standard_normal(5)
    c = 3.7
    assert np.allclose(soft_bellman_operator(mdp, r, v + c), soft_bellman_operator(mdp, r, v) + 0.8 * c, atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_contraction_property(seed):
    rng = np.random.default_rng(seed)
    mdp = envs.random_mdp(4, 2, float(rng.uniform(0.0, 0.99)), rng)
    r = rng.standard_normal((4, 2))
    v1, v2 = 10 * rng.standard_normal(4), 10 * rng.standard_normal(4)
    lhs = np.max(np.abs(soft_bellman_operator(mdp, r, v1) - soft_bellman_operator(mdp, r, v2)))
    assert lhs <= mdp.discount * np.max(np.abs(v1 - v2)) + 1e-12


def test_contraction_oracle(rng):
    assert check_contraction(rng).passed


def test_contraction_oracle_detects_wrong_discount(rng):
    def inflated(mdp, reward, v):
        return soft_bellman_operator(FiniteMdp(mdp.transition, mdp.initial_dist, min(0.999, mdp.discount * 1.05)), reward, v)

    assert not check_contraction(rng, operator=inflated).passed


def test_evaluation_examples():
    q = soft_policy_evaluation(bandit(1, 0.5), np.array([[1.0]]), np.ones((1, 1)))
    assert q[0, 0] == pytest.approx(2.0)
    q = soft_policy_evaluation(bandit(2, 0.0), np.zeros((1, 2)), np.full((1, 2), 0.5))
    assert np.allclose(q, 0.0)


def test_evaluation_self_consistency(rng):
    mdp = envs.random_mdp(6, 3, 0.9, rng)
    r = rng.standard_normal((6, 3))
    sol = soft_value_iteration(mdp, r, tol=1e-12)
    assert np.allclose(soft_policy_evaluation(mdp, r, sol.policy), sol.q, atol=1e-8)


def test_evaluation_zero_probability():
    with pytest.raises(MdpError, match="s=0, a=1"):
        soft_policy_evaluation(bandit(2, 0.5), np.zeros((1, 2)), np.array([[1.0, 0.0]]))


def test_policy_improvement_examples():
    assert np.allclose(policy_improvement(np.full((2, 3), 4.0)), 1 / 3)
    assert policy_improvement(np.array([[0.0, math.log(3)]]))[0] == pytest.approx([0.25, 0.75])
    q = np.array([[0.3, -1.0, 2.0]])
    assert np.allclose(policy_improvement(q + 100.0), policy_improvement(q), atol=1e-15)


def test_improvement_claim(rng):
    assert check_improvement(rng, n_tasks=5, n_steps=50).passed


def test_performance_deterministic():
    p = np.zeros((2, 2, 2))
    p[0, :, 1] = 1.0
    p[1, :, 0] = 1.0
    mdp = FiniteMdp(p, np.array([1.0, 0.0]), 0.9)
    perf = policy_performance(mdp, np.ones((2, 2)), np.array([[1.0, 0.0], [0.0, 1.0]]))
    assert perf.H == 0.0
    assert perf.J == pytest.approx(10.0)


def test_performance_uniform_entropy():
    perf = policy_performance(bandit(2, 0.5), np.zeros((1, 2)), np.full((1, 2), 0.5))
    assert perf.H == pytest.approx(2 * math.log(2), abs=1e-12)


def test_soft_optimal_dominates(rng):
    mdp = envs.random_mdp(4, 3, 0.9, rng)
    r = rng.standard_normal((4, 3))
    best = policy_performance(mdp, r, soft_value_iteration(mdp, r, tol=1e-12).policy).J_plus_H
    for _ in range(50):
        assert policy_performance(mdp, r, envs.random_policy(4, 3, rng)).J_plus_H <= best + 1e-9
