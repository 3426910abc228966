"""Independent numerical checks bundled as a pass/fail report.

Each oracle returns a measured discrepancy and the tolerance it is held to;
``passed`` is ``discrepancy <= tolerance``. Everything runs at fixed seeds so
the report is byte-stable.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import envs
from .mdp import Start, discounted_occupancy, discounted_pair_counts, flow_residual, rollout, sample_paths
from .meta import MetaConfig, eval_gradient, eval_loss, lower_gradient, lower_objective
from .online import (
    MeritConfig,
    OnlineState,
    StepSchedule,
    exact_prefix_gradient,
    finite_difference_gradient,
    initial_state,
    local_regret,
    merit_step,
    soft_gradients,
)
from .soft import policy_improvement, soft_bellman_operator, soft_policy_evaluation, soft_q_operator
from .soft import soft_value_iteration

REPORT_SCHEMA = "meritirl.oracles/1"


@dataclass(frozen=True)
class OracleResult:
    name: str
    discrepancy: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.discrepancy) and self.discrepancy <= self.tolerance)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "discrepancy": float(self.discrepancy),
            "tolerance": float(self.tolerance),
        }


def rbf_gridworld(size=5, slip=0.1, discount=0.9):
    xs = sorted({0, (size - 1) // 2, size - 1})
    spec = envs.GridworldSpec(
        size, size, goal=(size - 1, size - 1), slip_prob=slip, discount=discount,
        feature_kind="goal_distance_rbf", rbf_centers=tuple((x, y) for x in xs for y in xs), rbf_bandwidth=1.5,
    )
    return envs.build_gridworld(spec)


def check_prefix_gradient(rng, instances=3) -> OracleResult:
    worst = 0.0
    for _ in range(instances):
        world = rbf_gridworld()
        n = world.model.dim
        cfg = MeritConfig(0.5, 0.3 * rng.standard_normal(n), StepSchedule("sqrt_decay", 0.9, 0.5))
        expert = envs.expert_policy(world.mdp, 5.0 * world.true_reward)
        prefix = rollout(world.mdp, expert, None, int(rng.integers(3, 11)), rng)
        theta = rng.standard_normal(n)
        exact = exact_prefix_gradient(world.model, world.mdp, theta, prefix, cfg)
        fd = finite_difference_gradient(world.model, world.mdp, theta, prefix, cfg)
        worst = max(worst, np.max(np.abs(exact - fd)) / (1.0 + np.max(np.abs(exact))))
    return OracleResult("prefix_gradient_vs_finite_difference", worst, 1e-5)


def _small_task(rng):
    spec = envs.GridworldSpec(4, 4, goal=(3, 3), slip_prob=0.1, discount=0.9)
    dist = envs.TaskDistribution(spec, ((3, 3), (2, 3), (3, 2)), horizon=40)
    return envs.sample_meta_task(dist, 2, rng)


def check_lower_gradient(rng, instances=3) -> OracleResult:
    worst = 0.0
    for _ in range(instances):
        task = _small_task(rng)
        model, mdp = task.model, task.mdp
        cfg = MetaConfig.for_model(model, mdp.discount, 1.0, eta=0.6)
        prior = 0.3 * rng.standard_normal(model.dim)
        phi = rng.standard_normal(model.dim)
        exact = lower_gradient(model, mdp, phi, task, prior, cfg)
        fd = finite_difference_gradient(
            model, mdp, phi, None, None, loss=lambda p: lower_objective(model, mdp, p, task, prior, cfg)
        )
        worst = max(worst, np.max(np.abs(exact - fd)) / (1.0 + np.max(np.abs(exact))))
    return OracleResult("lower_gradient_vs_finite_difference", worst, 1e-5)


def check_eval_gradient(rng, instances=3) -> OracleResult:
    worst = 0.0
    for _ in range(instances):
        task = _small_task(rng)
        model, mdp = task.model, task.mdp
        cfg = MetaConfig.for_model(model, mdp.discount, 1.0, eta=0.6)
        phi = rng.standard_normal(model.dim)
        exact = eval_gradient(model, mdp, phi, task, cfg)
        fd = finite_difference_gradient(model, mdp, phi, None, None, loss=lambda p: eval_loss(model, mdp, p, task, cfg))
        worst = max(worst, np.max(np.abs(exact - fd)) / (1.0 + np.max(np.abs(exact))))
    return OracleResult("eval_gradient_vs_finite_difference", worst, 1e-5)


def check_contraction(rng, operator=None, n_mdps=10, n_pairs=10) -> OracleResult:
    """Largest excess of ``||T v1 - T v2|| - gamma ||v1 - v2||`` (half the pairs are constant shifts)."""
    operator = operator or soft_bellman_operator
    worst = -np.inf
    for _ in range(n_mdps):
        mdp = envs.random_mdp(6, 3, float(rng.uniform(0.5, 0.95)), rng)
        reward = rng.standard_normal((6, 3))
        for k in range(n_pairs):
            v1 = 5.0 * rng.standard_normal(6)
            v2 = v1 + rng.uniform(-5, 5) if k % 2 else 5.0 * rng.standard_normal(6)
            lhs = np.max(np.abs(operator(mdp, reward, v1) - operator(mdp, reward, v2)))
            worst = max(worst, lhs - mdp.discount * np.max(np.abs(v1 - v2)))
    return OracleResult("soft_bellman_contraction", max(worst, 0.0), 1e-12)


def check_improvement(rng, n_tasks=2, n_steps=20) -> OracleResult:
    worst = 0.0
    for _ in range(n_tasks):
        mdp = envs.random_mdp(5, 3, 0.9, rng)
        reward = rng.standard_normal((5, 3))
        pi = envs.random_policy(5, 3, rng)
        for _ in range(n_steps):
            q = soft_policy_evaluation(mdp, reward, pi)
            nxt = policy_improvement(q)
            gap = soft_q_operator(mdp, reward, q) - soft_policy_evaluation(mdp, reward, nxt)
            worst = max(worst, float(gap.max()))
            pi = nxt
    return OracleResult("policy_improvement", worst, 1e-8)


def check_iterate_bound(rng, steps=40) -> OracleResult:
    world = rbf_gridworld()
    n = world.model.dim
    lam = 0.5
    cfg = MeritConfig(lam, 0.3 * rng.standard_normal(n), StepSchedule("sqrt_decay", 0.9, lam))
    expert = envs.expert_policy(world.mdp, 5.0 * world.true_reward)
    state = initial_state(world.model, world.mdp, cfg)
    worst = 0.0
    for s, a in envs.expert_stream(world.mdp, expert, steps, rng):
        state = merit_step(world.model, world.mdp, state, (s, a), cfg, rng)
        worst = max(worst, float(np.linalg.norm(state.theta - cfg.meta_prior)))
    bound = 2.0 * world.model.grad_norm_bound / lam
    return OracleResult("iterate_bound", max(0.0, worst - bound), 1e-9)


def check_occupancy_rollouts(rng, n=10_000) -> OracleResult:
    """Largest z-score of rollout averages against the exact occupancy (tail bound added to the band)."""
    mdp = envs.random_mdp(5, 2, 0.8, rng)
    pi = envs.random_policy(5, 2, rng)
    f = rng.uniform(-1, 1, (5, 2))
    horizon = 60
    states, actions = sample_paths(mdp, pi, Start.initial(), horizon, n, rng)
    sums = discounted_pair_counts(mdp, states, actions) @ f.reshape(-1)
    exact = discounted_occupancy(mdp, pi).expect(f)
    tail = mdp.discount**horizon * np.abs(f).max() / (1.0 - mdp.discount)
    se = sums.std(ddof=1) / np.sqrt(n)
    excess = max(0.0, abs(sums.mean() - exact) - tail)
    return OracleResult("occupancy_vs_rollouts_z", excess / se, 3.0)


def check_flow_residual(rng) -> OracleResult:
    worst = 0.0
    for _ in range(5):
        mdp = envs.random_mdp(6, 3, float(rng.uniform(0.0, 0.99)), rng)
        pi = envs.random_policy(6, 3, rng)
        occ = discounted_occupancy(mdp, pi)
        worst = max(worst, flow_residual(mdp, pi, None, occ.d))
    return OracleResult("occupancy_flow_residual", worst, 1e-9)


def check_regret_identity(rng) -> OracleResult:
    world = rbf_gridworld()
    n = world.model.dim
    cfg = MeritConfig(0.5, np.zeros(n), StepSchedule("sqrt_decay", 0.9, 0.5))
    expert = envs.expert_policy(world.mdp, 5.0 * world.true_reward)
    prefix = rollout(world.mdp, expert, None, 8, rng)
    theta = rng.standard_normal(n)
    grads = soft_gradients(world.model, world.mdp, theta)
    state = OnlineState(len(prefix), theta, grads.policy, prefix)
    ell = local_regret(world.model, world.mdp, state, cfg, grads)
    g = exact_prefix_gradient(world.model, world.mdp, theta, prefix, cfg, grads)
    # per-term gradients recovered by differencing consecutive prefixes
    parts = [exact_prefix_gradient(world.model, world.mdp, theta, prefix.prefix(1), cfg, grads)]
    for k in range(2, len(prefix) + 1):
        parts.append(
            exact_prefix_gradient(world.model, world.mdp, theta, prefix.prefix(k), cfg, grads)
            - exact_prefix_gradient(world.model, world.mdp, theta, prefix.prefix(k - 1), cfg, grads)
        )
    summed = np.sum(parts, axis=0)
    return OracleResult(
        "regret_identity",
        max(abs(ell * len(prefix) ** 2 - g @ g), float(np.max(np.abs(summed - g)))),
        1e-9,
    )


def check_soft_consistency(rng) -> OracleResult:
    worst = 0.0
    for _ in range(5):
        mdp = envs.random_mdp(6, 3, 0.9, rng)
        sol = soft_value_iteration(mdp, rng.standard_normal((6, 3)))
        worst = max(worst, float(np.max(np.abs(sol.policy * np.exp(sol.v)[:, None] - np.exp(sol.q)) / np.exp(sol.q))))
    return OracleResult("soft_policy_consistency", worst, 1e-9)


def oracle_check_suite(config: dict | None = None, operator=None) -> dict:
    """Run every oracle; ``operator`` replaces the soft Bellman operator in the contraction check."""
    opts = (config or {}).get("oracles", {})
    seed = int(opts.get("seed", 0))
    instances = int(opts.get("instances", 3))

    def rng(k):
        return np.random.default_rng(np.random.SeedSequence([seed, k]))

    results = [
        check_prefix_gradient(rng(0), instances),
        check_lower_gradient(rng(1), instances),
        check_eval_gradient(rng(2), instances),
        check_contraction(rng(3), operator),
        check_improvement(rng(4)),
        check_iterate_bound(rng(5)),
        check_occupancy_rollouts(rng(6)),
        check_flow_residual(rng(7)),
        check_regret_identity(rng(8)),
        check_soft_consistency(rng(9)),
    ]
    entries = [r.to_dict() for r in results]
    return {"schema": REPORT_SCHEMA, "passed": all(e["passed"] for e in entries), "oracles": entries}
