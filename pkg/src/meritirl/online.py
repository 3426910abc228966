"""Online reward learning from a growing prefix of one expert trajectory.

The learner keeps a reward parameter ``theta`` and a policy. After each new
expert pair it does one soft policy-iteration step and one gradient step on
the regularised negative log-likelihood of the observed prefix. The gradient
compares a learner rollout from the expert's first state against the expert
prefix completed by a learner rollout.

Exact quantities (losses, gradients, local regret) use occupancy solves; the
learning rule itself uses sampled rollouts by default.
"""
from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator

import numpy as np
from scipy.optimize import minimize

from .config import ConfigError
from .mdp import (
    FiniteMdp,
    MdpError,
    Start,
    Trajectory,
    discounted_occupancy,
    discounted_pair_counts,
    policy_transition,
    sample_paths,
    truncation_horizon,
)
from .rewards import RewardModel
from .soft import (
    SoftSolution,
    policy_improvement,
    policy_performance,
    soft_policy_evaluation,
    soft_value_iteration,
)

RUN_SCHEMA = "meritirl.run/1"

BASELINES = ("merit", "it_irl", "naive_merit", "naive_it", "hindsight")
REGULARISED = {"merit": True, "it_irl": False, "naive_merit": True, "naive_it": False, "hindsight": True}


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class StepSchedule:
    """Step sizes ``alpha_t``.

    sqrt_decay:          (1 - gamma) / (lam * sqrt(t + 1))
    linear_reward_decay: (1 - gamma) / (lam * (t + 1) * (1 - gamma^(t+1)))
    constant:            value
    """

    kind: str
    discount: float
    lam: float
    value: float | None = None

    def __post_init__(self):
        if self.kind not in ("sqrt_decay", "linear_reward_decay", "constant"):
            raise ConfigError(f"unknown schedule kind {self.kind!r}")
        if self.kind == "constant":
            if self.value is None or not self.value > 0:
                raise ConfigError("constant schedule needs a positive value")
        elif not self.lam > 0:
            raise ConfigError("decaying schedules need lam > 0")


def step_size(schedule: StepSchedule, t: int) -> float:
    if t < 0:
        raise ConfigError("t must be >= 0")
    g = schedule.discount
    if schedule.kind == "constant":
        return float(schedule.value)
    if schedule.kind == "sqrt_decay":
        return (1.0 - g) / (schedule.lam * math.sqrt(t + 1))
    if g == 0.0:
        return 1.0 / (schedule.lam * (t + 1))
    return (1.0 - g) / (schedule.lam * (t + 1) * (1.0 - g ** (t + 1)))


@dataclass(frozen=True, eq=False)
class MeritConfig:
    """Learner settings.

    ``horizon=None`` picks the smallest rollout length whose discounted tail
    ``gamma^H * C / (1 - gamma)`` is below ``tail_tol`` (``C`` = the reward
    model's gradient norm bound). ``n_rollouts`` averages several rollouts per
    expectation (1 is the plain estimator).
    """

    lam: float
    meta_prior: np.ndarray
    schedule: StepSchedule
    horizon: int | None = None
    tail_tol: float = 1e-8
    policy_mode: str = "one_step"
    estimator_mode: str = "sampled"
    n_rollouts: int = 1
    initial_policy: np.ndarray | None = None
    solver_tol: float = 1e-12

    def __post_init__(self):
        if not self.lam > 0:
            raise ConfigError("lam must be > 0")
        prior = np.asarray(self.meta_prior, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(prior)):
            raise ConfigError("meta_prior has non-finite entries")
        object.__setattr__(self, "meta_prior", prior)
        if self.horizon is not None and self.horizon < 1:
            raise ConfigError("horizon must be >= 1")
        if self.policy_mode not in ("one_step", "exact"):
            raise ConfigError(f"unknown policy_mode {self.policy_mode!r}")
        if self.estimator_mode not in ("sampled", "exact"):
            raise ConfigError(f"unknown estimator_mode {self.estimator_mode!r}")
        if self.n_rollouts < 1:
            raise ConfigError("n_rollouts must be >= 1")

    def rollout_horizon(self, model: RewardModel, mdp: FiniteMdp) -> int:
        if self.horizon is not None:
            return self.horizon
        return truncation_horizon(mdp.discount, max(model.grad_norm_bound, 1e-300), self.tail_tol)

    def check(self, model: RewardModel, mdp: FiniteMdp) -> None:
        if self.meta_prior.shape != (model.dim,):
            raise ConfigError(f"meta_prior has length {self.meta_prior.size}, model needs {model.dim}")
        if (model.n_states, model.n_actions) != (mdp.n_states, mdp.n_actions):
            raise ConfigError("reward model and MDP disagree on state/action counts")


def reg_weight(discount: float, t: int) -> float:
    """``sum_{i<=t} gamma^i``."""
    if discount == 0.0:
        return 1.0
    return (1.0 - discount ** (t + 1)) / (1.0 - discount)


# ---------------------------------------------------------------------------
# exact soft-optimal quantities


@dataclass(frozen=True, eq=False)
class SoftGradients:
    """Soft-optimal solution of ``r_theta`` with the parameter gradients of its values.

    ``grad_v[s]`` = d V(s) / d theta and ``grad_q[s, a]`` = d Q(s, a) / d theta.
    """

    solution: SoftSolution
    grad_v: np.ndarray
    grad_q: np.ndarray

    @property
    def policy(self) -> np.ndarray:
        return self.solution.policy

    @property
    def grad_log_policy(self) -> np.ndarray:
        return self.grad_q - self.grad_v[:, None, :]


def solve_reward(model, mdp, theta, tol=1e-12, v0=None) -> SoftSolution:
    return soft_value_iteration(mdp, model.reward_table(theta), tol=tol, v0=v0, method="policy")


def feature_values(model: RewardModel, mdp: FiniteMdp, policy) -> np.ndarray:
    """``E_pi[sum_t gamma^t features(S_t, A_t) | S_0 = s]`` for every state, shape (S, n)."""
    pi = np.asarray(policy, dtype=np.float64)
    per_state = np.einsum("sa,san->sn", pi, model.features)
    return np.linalg.solve(np.eye(mdp.n_states) - mdp.discount * policy_transition(mdp, pi), per_state)


def soft_gradients(model, mdp, theta, tol=1e-12, v0=None) -> SoftGradients:
    sol = solve_reward(model, mdp, theta, tol=tol, v0=v0)
    grad_v = feature_values(model, mdp, sol.policy)
    grad_q = model.features + mdp.discount * np.einsum("sat,tn->san", mdp.transition, grad_v)
    return SoftGradients(sol, grad_v, grad_q)


def _check_prefix(mdp, prefix: Trajectory):
    if len(prefix) == 0:
        raise MdpError("prefix must be nonempty")
    prefix.check_bounds(mdp)


def expert_feature_sum(model, mdp, prefix: Trajectory, upto: int | None = None) -> np.ndarray:
    """``sum_{i<=upto} gamma^i features(s_i, a_i)`` over the prefix."""
    n = len(prefix) if upto is None else min(len(prefix), upto + 1)
    powers = mdp.discount ** np.arange(n, dtype=np.float64)
    return powers @ model.features[prefix.states[:n], prefix.actions[:n]]


def prefix_loss(model, mdp, theta, prefix: Trajectory, cfg: MeritConfig) -> float:
    """``sum_{i<=t} [-gamma^i log pi_theta(a_i|s_i) + lam gamma^i / 2 ||theta - prior||^2]``."""
    _check_prefix(mdp, prefix)
    theta = np.asarray(theta, dtype=np.float64)
    sol = solve_reward(model, mdp, theta, tol=cfg.solver_tol)
    log_pi = sol.q - sol.v[:, None]
    powers = mdp.discount ** np.arange(len(prefix), dtype=np.float64)
    nll = -powers @ log_pi[prefix.states, prefix.actions]
    reg = 0.5 * cfg.lam * powers.sum() * float(np.sum((theta - cfg.meta_prior) ** 2))
    return float(nll + reg)


def per_step_losses(model, mdp, theta, prefix: Trajectory, cfg: MeritConfig, sol=None) -> np.ndarray:
    """Individual ``L_i(theta)`` for each prefix position."""
    theta = np.asarray(theta, dtype=np.float64)
    if sol is None:
        sol = solve_reward(model, mdp, theta, tol=cfg.solver_tol)
    log_pi = sol.q - sol.v[:, None]
    powers = mdp.discount ** np.arange(len(prefix), dtype=np.float64)
    dist2 = float(np.sum((theta - cfg.meta_prior) ** 2))
    return powers * (-log_pi[prefix.states, prefix.actions] + 0.5 * cfg.lam * dist2)


def exact_prefix_gradient(model, mdp, theta, prefix: Trajectory, cfg: MeritConfig, grads=None) -> np.ndarray:
    """Exact gradient of ``prefix_loss``.

    Uses ``d log pi_theta(a|s) = dQ(s,a) - dV(s)`` with both value gradients
    obtained from feature occupancies of the soft-optimal policy. When every
    expert transition in the prefix is deterministic this coincides with
    ``lemma_gradient``; in general ``lemma_gradient`` is its expectation over
    the expert's next states.
    """
    _check_prefix(mdp, prefix)
    theta = np.asarray(theta, dtype=np.float64)
    if grads is None:
        grads = soft_gradients(model, mdp, theta, tol=cfg.solver_tol)
    t = len(prefix) - 1
    powers = mdp.discount ** np.arange(t + 1, dtype=np.float64)
    glp = grads.grad_log_policy[prefix.states, prefix.actions]
    return -powers @ glp + cfg.lam * reg_weight(mdp.discount, t) * (theta - cfg.meta_prior)


def lemma_gradient(model, mdp, theta, prefix: Trajectory, cfg: MeritConfig, grads=None) -> np.ndarray:
    """Telescoped gradient form: start value gradient, expert features, completion term.

    ``dV(s_0) - sum_{i<=t} gamma^i f(s_i, a_i) - gamma^(t+1) E[dV(S') | s_t, a_t]
    + lam (1 - gamma^(t+1)) / (1 - gamma) (theta - prior)``.
    """
    _check_prefix(mdp, prefix)
    theta = np.asarray(theta, dtype=np.float64)
    if grads is None:
        grads = soft_gradients(model, mdp, theta, tol=cfg.solver_tol)
    return _merit_exact(model, mdp, grads.grad_v, prefix, cfg, theta, regularise=True)


def _merit_exact(model, mdp, fvals, prefix, cfg, theta, regularise):
    t = len(prefix) - 1
    s0, st, at = prefix.states[0], prefix.states[t], prefix.actions[t]
    g = fvals[s0] - expert_feature_sum(model, mdp, prefix)
    g = g - mdp.discount ** (t + 1) * (mdp.transition[st, at] @ fvals)
    if regularise:
        g = g + cfg.lam * reg_weight(mdp.discount, t) * (theta - cfg.meta_prior)
    return g


def loss_gradient(model, mdp, theta, prefix, cfg):
    """Alias of ``exact_prefix_gradient`` (the true derivative of ``prefix_loss``)."""
    return exact_prefix_gradient(model, mdp, theta, prefix, cfg)


def finite_difference_gradient(model, mdp, theta, prefix, cfg, eps=1e-5, loss=None) -> np.ndarray:
    """Central differences of ``loss`` (default ``prefix_loss``), one coordinate at a time."""
    if not eps > 0:
        raise ConfigError("eps must be > 0")
    loss = loss or (lambda th: prefix_loss(model, mdp, th, prefix, cfg))
    theta = np.asarray(theta, dtype=np.float64)
    out = np.empty_like(theta)
    for k in range(theta.size):
        e = np.zeros_like(theta)
        e[k] = eps
        out[k] = (loss(theta + e) - loss(theta - e)) / (2.0 * eps)
    return out


# ---------------------------------------------------------------------------
# learner state and gradient estimators


@dataclass(frozen=True)
class StepRecord:
    t: int
    alpha: float
    grad_norm: float
    theta_dist_to_prior: float


@dataclass(frozen=True, eq=False)
class OnlineState:
    """Learner state after ``t`` observations."""

    t: int
    theta: np.ndarray
    policy: np.ndarray
    prefix: Trajectory
    history: tuple = ()

    def __post_init__(self):
        if len(self.prefix) != self.t:
            raise ConfigError(f"prefix length {len(self.prefix)} does not match t={self.t}")
        if not np.all(np.isfinite(self.theta)):
            raise FloatingPointError(f"theta became non-finite at t={self.t}")


def initial_state(model, mdp, cfg: MeritConfig, kind: str = "merit", rng=None) -> OnlineState:
    """``theta_0 = prior`` for regularised learners; ``0.1 * N(0, I)`` draws otherwise."""
    cfg.check(model, mdp)
    if REGULARISED[kind]:
        theta = cfg.meta_prior.copy()
    else:
        if rng is None:
            raise ConfigError(f"{kind} needs an rng for its random initialisation")
        theta = 0.1 * rng.standard_normal(model.dim)
    if cfg.initial_policy is None:
        policy = np.full((mdp.n_states, mdp.n_actions), 1.0 / mdp.n_actions)
    else:
        policy = np.array(cfg.initial_policy, dtype=np.float64)
    return OnlineState(0, theta, policy, Trajectory.from_pairs([]))


def _sampled_sum(model, mdp, policy, start, horizon, n, rng, skip=0, start_power=0):
    """Mean over ``n`` rollouts of ``sum_{i>=skip} gamma^(i+start_power) f(s_i, a_i)``."""
    states, actions = sample_paths(mdp, policy, start, horizon, n, rng)
    counts = discounted_pair_counts(mdp, states[:, skip:], actions[:, skip:], start_power + skip)
    return counts.mean(axis=0) @ model.flat_features


def _truncated_exact(model, mdp, policy, s0, n_steps):
    """``E[sum_{i<n_steps} gamma^i f(S_i, A_i) | S_0 = s0]`` in closed form."""
    pi = np.asarray(policy, dtype=np.float64)
    p_pi = policy_transition(mdp, pi)
    per_state = np.einsum("sa,san->sn", pi, model.features)
    occ = np.linalg.solve(np.eye(mdp.n_states) - mdp.discount * p_pi, np.eye(mdp.n_states))
    tail = np.linalg.matrix_power(mdp.discount * p_pi, n_steps)
    weights = (np.eye(mdp.n_states)[s0] - tail[s0]) @ occ
    return weights @ per_state


def baseline_gradient(
    kind: str,
    model: RewardModel,
    mdp: FiniteMdp,
    state: OnlineState,
    new_pair,
    policy_next,
    cfg: MeritConfig,
    rng,
    full_trajectory: Trajectory | None = None,
) -> np.ndarray:
    """Update direction for ``kind`` at time ``t = state.t``.

    merit / it_irl compare a learner rollout from the expert's first state
    with the expert prefix completed by a learner rollout from ``new_pair``;
    naive_merit / naive_it cut both sums at ``i <= t``; hindsight compares
    the complete expert trajectory with a learner rollout of equal length.
    The regularised kinds add ``lam (1 - gamma^(t+1)) / (1 - gamma) (theta - prior)``.
    """
    if kind not in BASELINES:
        raise ConfigError(f"unknown baseline {kind!r}")
    t = state.t
    prefix = state.prefix.append(*new_pair)
    prefix.check_bounds(mdp)
    s0 = int(prefix.states[0])
    gamma = mdp.discount
    horizon = cfg.rollout_horizon(model, mdp)
    m = cfg.n_rollouts
    exact = cfg.estimator_mode == "exact"

    if kind in ("merit", "it_irl"):
        if exact:
            fvals = feature_values(model, mdp, policy_next)
            return _merit_exact(model, mdp, fvals, prefix, cfg, state.theta, REGULARISED[kind])
        learner = _sampled_sum(model, mdp, policy_next, Start.at_state(s0), horizon, m, rng)
        suffix_len = horizon - (t + 1)
        completion = expert_feature_sum(model, mdp, prefix)
        if suffix_len > 0:
            st, at = int(prefix.states[t]), int(prefix.actions[t])
            completion = completion + _sampled_sum(
                model, mdp, policy_next, Start.at_pair(st, at), suffix_len + 1, m, rng, skip=1, start_power=t
            )
        g = learner - completion
    elif kind in ("naive_merit", "naive_it"):
        n_steps = min(t + 1, horizon)
        if exact:
            learner = _truncated_exact(model, mdp, policy_next, s0, n_steps)
        else:
            learner = _sampled_sum(model, mdp, policy_next, Start.at_state(s0), n_steps, m, rng)
        g = learner - expert_feature_sum(model, mdp, prefix, upto=n_steps - 1)
    else:
        if full_trajectory is None or len(full_trajectory) == 0:
            raise ConfigError("hindsight needs the complete expert trajectory")
        full_trajectory.check_bounds(mdp)
        n_steps = min(len(full_trajectory), horizon)
        s_full = int(full_trajectory.states[0])
        if exact:
            learner = _truncated_exact(model, mdp, policy_next, s_full, n_steps)
        else:
            learner = _sampled_sum(model, mdp, policy_next, Start.at_state(s_full), n_steps, m, rng)
        g = learner - expert_feature_sum(model, mdp, full_trajectory, upto=n_steps - 1)

    if REGULARISED[kind]:
        g = g + cfg.lam * reg_weight(gamma, t) * (state.theta - cfg.meta_prior)
    return g


def estimate_gradient(model, mdp, state: OnlineState, new_pair, policy_next, cfg: MeritConfig, rng) -> np.ndarray:
    """The learner's gradient ``g_t`` (sampled or occupancy-based per ``cfg.estimator_mode``)."""
    return baseline_gradient("merit", model, mdp, state, new_pair, policy_next, cfg, rng)


def next_policy(model, mdp, state: OnlineState, cfg: MeritConfig) -> np.ndarray:
    reward = model.reward_table(state.theta)
    if cfg.policy_mode == "exact":
        return soft_value_iteration(mdp, reward, tol=cfg.solver_tol, method="policy").policy
    return policy_improvement(soft_policy_evaluation(mdp, reward, state.policy))


def merit_step(
    model, mdp, state: OnlineState, new_pair, cfg: MeritConfig, rng, kind="merit", full_trajectory=None
) -> OnlineState:
    """Observe ``new_pair``, improve the policy once, take one reward step."""
    policy = next_policy(model, mdp, state, cfg)
    g = baseline_gradient(kind, model, mdp, state, new_pair, policy, cfg, rng, full_trajectory)
    alpha = step_size(cfg.schedule, state.t)
    theta = state.theta - alpha * g
    rec = StepRecord(
        state.t, alpha, float(np.linalg.norm(g)), float(np.linalg.norm(theta - cfg.meta_prior))
    )
    return OnlineState(state.t + 1, theta, policy, state.prefix.append(*new_pair), state.history + (rec,))


def local_regret(model, mdp, state: OnlineState, cfg: MeritConfig, grads=None) -> float:
    """``||(1/(t+1)) sum_{i<=t} dL_i(theta_t)||^2`` for the observed prefix (needs t >= 1 pairs)."""
    g = exact_prefix_gradient(model, mdp, state.theta, state.prefix, cfg, grads)
    return float(g @ g) / len(state.prefix) ** 2


# ---------------------------------------------------------------------------
# online loop


@dataclass
class RegretRecord:
    """Per-step local regret ``ell_t`` (at ``theta_t`` after seeing pair ``t``) and losses ``L_t(theta_t)``."""

    local: np.ndarray
    losses: np.ndarray

    @property
    def cumulative(self) -> np.ndarray:
        return np.cumsum(self.local)


@dataclass
class OnlineResult:
    state: OnlineState
    regret: RegretRecord | None
    j_true: np.ndarray | None
    thetas: np.ndarray
    kind: str = "merit"
    extras: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# schema: {RUN_SCHEMA}\n")
        buf.write("t,alpha,grad_norm,local_regret,J_true,theta_dist_to_prior\n")
        for i, rec in enumerate(self.state.history):
            ell = repr(float(self.regret.local[i])) if self.regret is not None else ""
            jt = repr(float(self.j_true[i])) if self.j_true is not None else ""
            buf.write(f"{rec.t},{rec.alpha!r},{rec.grad_norm!r},{ell},{jt},{rec.theta_dist_to_prior!r}\n")
        return buf.getvalue()

    def theta_json(self) -> str:
        return json.dumps([float(x) for x in self.state.theta])


def run_online(
    model: RewardModel,
    mdp: FiniteMdp,
    expert_stream: Iterable,
    T: int,
    kind: str,
    cfg: MeritConfig,
    rng,
    true_reward=None,
    full_trajectory: Trajectory | None = None,
    record_regret: bool = True,
    on_step=None,
) -> OnlineResult:
    """Consume ``T`` expert pairs, updating after each one.

    Row ``t`` of the records holds the local regret and loss at ``theta_t``
    on the prefix through pair ``t`` and ``J_true`` of the policy produced
    by step ``t``. ``on_step(t, state)`` is called after every update.
    """
    if kind not in BASELINES:
        raise ConfigError(f"unknown baseline {kind!r}")
    if T < 1:
        raise ConfigError("T must be >= 1")
    if kind == "hindsight" and full_trajectory is None:
        raise ConfigError("hindsight needs the complete expert trajectory")
    state = initial_state(model, mdp, cfg, kind, rng)
    stream: Iterator = iter(expert_stream)
    thetas = [state.theta.copy()]
    local = np.zeros(T) if record_regret else None
    losses = np.zeros(T) if record_regret else None
    j_true = np.zeros(T) if true_reward is not None else None
    v_warm = None
    gamma = mdp.discount
    for t in range(T):
        try:
            s, a = next(stream)
        except StopIteration:
            raise ConfigError(f"expert stream exhausted after {t} of {T} pairs") from None
        pair = (int(s), int(a))
        if record_regret:
            grads = soft_gradients(model, mdp, state.theta, tol=cfg.solver_tol, v0=v_warm)
            v_warm = grads.solution.v
            seen = state.prefix.append(*pair)
            local[t] = local_regret(model, mdp, replace(state, t=t + 1, prefix=seen), cfg, grads)
            log_pi = grads.solution.q[pair] - grads.solution.v[pair[0]]
            dist2 = float(np.sum((state.theta - cfg.meta_prior) ** 2))
            losses[t] = gamma**t * (-log_pi + 0.5 * cfg.lam * dist2)
        state = merit_step(model, mdp, state, pair, cfg, rng, kind, full_trajectory)
        thetas.append(state.theta.copy())
        if j_true is not None:
            j_true[t] = policy_performance(mdp, true_reward, state.policy).J
        if on_step is not None:
            on_step(t, state)
    regret = RegretRecord(local, losses) if record_regret else None
    return OnlineResult(state, regret, j_true, np.array(thetas), kind)


# ---------------------------------------------------------------------------
# comparator for loss regret


def stationary_objective(model, mdp, theta, expert_policy, cfg: MeritConfig, mu=None):
    """``sum mu_E(s,a) (-log pi_theta(a|s)) + lam/2 ||theta - prior||^2`` and its gradient."""
    if mu is None:
        mu = discounted_occupancy(mdp, expert_policy).mu
    grads = soft_gradients(model, mdp, theta, tol=cfg.solver_tol)
    log_pi = grads.solution.q - grads.solution.v[:, None]
    diff = np.asarray(theta) - cfg.meta_prior
    value = -float(np.sum(mu * log_pi)) + 0.5 * cfg.lam * float(diff @ diff)
    grad = -np.einsum("sa,san->n", mu, grads.grad_log_policy) + cfg.lam * diff
    return value, grad


def comparator_theta(model, mdp, expert_policy, cfg: MeritConfig, gtol=1e-8, theta0=None) -> np.ndarray:
    """Minimiser of ``stationary_objective`` to gradient norm ``gtol``.

    The objective is strongly convex for linear rewards (the soft value is
    convex in theta and the quadratic adds curvature ``lam``), so BFGS with
    the exact gradient converges to the unique minimiser.
    """
    mu = discounted_occupancy(mdp, expert_policy).mu
    x0 = cfg.meta_prior.copy() if theta0 is None else np.asarray(theta0, dtype=np.float64)
    fun = lambda th: stationary_objective(model, mdp, th, expert_policy, cfg, mu)  # noqa: E731
    res = minimize(fun, x0, jac=True, method="BFGS", options={"gtol": gtol * 0.1, "maxiter": 10_000})
    theta = res.x
    _, grad = fun(theta)
    if np.linalg.norm(grad) > gtol:
        raise RuntimeError(f"comparator solve stalled at gradient norm {np.linalg.norm(grad):.3e}")
    return theta


def comparator_losses(model, mdp, theta_star, prefix: Trajectory, cfg: MeritConfig) -> np.ndarray:
    """``L_t(theta*)`` for each prefix position."""
    return per_step_losses(model, mdp, theta_star, prefix, cfg)


def window_regret(losses, comparator, start, stop) -> float:
    """``sum_{start<=t<stop} [L_t(theta_t) - L_t(theta*)]`` summed directly over the window."""
    return float(np.sum(np.asarray(losses)[start:stop] - np.asarray(comparator)[start:stop]))
