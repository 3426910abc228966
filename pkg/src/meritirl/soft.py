"""Entropy-regularised RL on finite MDPs (temperature 1).

Soft values satisfy ``Q(s,a) = r(s,a) + gamma E[V(s')]`` with
``V(s) = log sum_a exp Q(s,a)``; the soft Bellman policy is
``pi(a|s) = exp(Q(s,a) - V(s))``.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp, softmax, xlogy

from . import kernels
from .mdp import FiniteMdp, MdpError, check_policy, discounted_occupancy, policy_transition

SOLUTION_SCHEMA = "meritirl.soft_solution/1"


class SoftSolveError(RuntimeError):
    """Soft value iteration did not reach its tolerance."""

    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


def _finite(x, name):
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise MdpError(f"{name} has NaN or infinite entries")
    return x


def _check_reward(mdp, reward):
    r = _finite(reward, "reward table")
    if r.shape != (mdp.n_states, mdp.n_actions):
        raise MdpError(f"reward table must have shape {(mdp.n_states, mdp.n_actions)}, got {r.shape}")
    return r


def backup(mdp: FiniteMdp, reward, v) -> np.ndarray:
    """``r(s,a) + gamma * sum_s' P(s'|s,a) v(s')``."""
    return reward + mdp.discount * (mdp.transition @ v)


def soft_bellman_operator(mdp: FiniteMdp, reward, v) -> np.ndarray:
    """``(T v)(s) = log sum_a exp(r(s,a) + gamma E[v(s')])`` with a max-shifted log-sum-exp."""
    r = _check_reward(mdp, reward)
    v = _finite(v, "value")
    return logsumexp(backup(mdp, r, v), axis=1)


def soft_q_operator(mdp: FiniteMdp, reward, q) -> np.ndarray:
    """``(T q)(s,a) = r(s,a) + gamma E[log sum_a' exp q(s',a')]``."""
    r = _check_reward(mdp, reward)
    q = _finite(q, "q table")
    return backup(mdp, r, logsumexp(q, axis=1))


def policy_improvement(q) -> np.ndarray:
    """Row softmax of a Q table (strictly positive rows summing to 1)."""
    q = _finite(q, "q table")
    return softmax(q, axis=1)


@dataclass(frozen=True, eq=False)
class SoftSolution:
    q: np.ndarray
    v: np.ndarray
    policy: np.ndarray
    residual: float
    iterations: int = 0

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# schema: {SOLUTION_SCHEMA}\n")
        buf.write("state,action,q,v,pi\n")
        for s in range(self.q.shape[0]):
            for a in range(self.q.shape[1]):
                buf.write(f"{s},{a},{self.q[s, a]!r},{self.v[s]!r},{self.policy[s, a]!r}\n")
        return buf.getvalue()


def default_max_iter(discount: float, tol: float) -> int:
    if discount == 0.0:
        return 100
    return 100 * math.ceil(math.log(1.0 / tol) / math.log(1.0 / discount))


def _assemble(mdp, r, v_prev, residual, iterations):
    q = backup(mdp, r, v_prev)
    v = logsumexp(q, axis=1)
    return SoftSolution(q, v, np.exp(q - v[:, None]), residual, iterations)


def soft_value_iteration(
    mdp: FiniteMdp,
    reward,
    tol: float = 1e-10,
    max_iter: int | None = None,
    v0=None,
    method: str = "value",
) -> SoftSolution:
    """Solve the entropy-regularised control problem for ``reward``.

    ``method="value"`` iterates the soft Bellman operator until successive
    iterates differ by at most ``tol``. ``method="policy"`` runs soft policy
    iteration (exact evaluation + softmax improvement), which converges in a
    handful of linear solves, and stops on the same sup-norm residual test.
    Either way the returned ``q``, ``v`` and ``policy`` are assembled from the
    final iterate so that ``policy * exp(v) == exp(q)`` and
    ``v == logsumexp(q)`` hold to round-off.
    """
    if tol <= 0:
        raise MdpError("tol must be positive")
    r = _check_reward(mdp, reward)
    v_init = np.zeros(mdp.n_states) if v0 is None else _finite(v0, "v0").copy()
    if method == "value":
        if max_iter is None:
            max_iter = default_max_iter(mdp.discount, tol)
        v_prev, _, it, residual = kernels.soft_value_iteration(
            np.ascontiguousarray(mdp.transition), np.ascontiguousarray(r), mdp.discount,
            np.ascontiguousarray(v_init), tol, max_iter,
        )
        if residual > tol:
            raise SoftSolveError(
                f"soft value iteration stopped after {it} iterations with residual {residual:.3e}", residual
            )
        return _assemble(mdp, r, np.asarray(v_prev), residual, it)
    if method == "policy":
        if max_iter is None:
            max_iter = 200
        pi = policy_improvement(backup(mdp, r, v_init))
        residual = math.inf
        for it in range(1, max_iter + 1):
            v = _evaluate_v(mdp, r, pi)
            q = backup(mdp, r, v)
            residual = float(np.max(np.abs(logsumexp(q, axis=1) - v)))
            if residual <= tol:
                return _assemble(mdp, r, v, residual, it)
            pi = softmax(q, axis=1)
        raise SoftSolveError(f"soft policy iteration stopped with residual {residual:.3e}", residual)
    raise MdpError(f"unknown method {method!r}")


def _log_policy(mdp, policy):
    pi = check_policy(mdp, policy)
    zero = np.argwhere(pi <= 0.0)
    if len(zero):
        s, a = zero[0]
        raise MdpError(f"policy assigns zero probability to (s={s}, a={a}); log pi undefined")
    return pi, np.log(pi)


def _evaluate_v(mdp, r, pi, log_pi=None):
    if log_pi is None:
        per_state = np.sum(pi * r - xlogy(pi, pi), axis=1)
    else:
        per_state = np.sum(pi * (r - log_pi), axis=1)
    return np.linalg.solve(np.eye(mdp.n_states) - mdp.discount * policy_transition(mdp, pi), per_state)


def soft_policy_evaluation(mdp: FiniteMdp, reward, policy) -> np.ndarray:
    """Exact soft Q-function of a fixed policy.

    Solves ``Q = r + gamma P [sum_a' pi(a'|s') (Q(s',a') - log pi(a'|s'))]``.
    The fixed point is obtained from the state-level system
    ``(I - gamma P_pi) V = E_pi[r - log pi]`` followed by ``Q = r + gamma P V``,
    which is the same linear system reduced to states.
    """
    r = _check_reward(mdp, reward)
    pi, log_pi = _log_policy(mdp, policy)
    return backup(mdp, r, _evaluate_v(mdp, r, pi, log_pi))


def soft_state_values(mdp: FiniteMdp, reward, policy) -> np.ndarray:
    """``V^soft_pi(s)`` for every state."""
    r = _check_reward(mdp, reward)
    pi, log_pi = _log_policy(mdp, policy)
    return _evaluate_v(mdp, r, pi, log_pi)


@dataclass(frozen=True)
class PolicyPerformance:
    J: float
    H: float

    @property
    def J_plus_H(self) -> float:
        return self.J + self.H


def policy_performance(mdp: FiniteMdp, reward, policy) -> PolicyPerformance:
    """Discounted reward ``J`` and causal entropy ``H`` from ``initial_dist``.

    Zero-probability actions carry zero occupancy, so they contribute nothing
    to ``H`` (deterministic policies are allowed here).
    """
    r = _check_reward(mdp, reward)
    pi = check_policy(mdp, policy)
    occ = discounted_occupancy(mdp, pi, None)
    log_pi = np.log(np.where(pi > 0.0, pi, 1.0))
    return PolicyPerformance(occ.expect(r), -occ.expect(log_pi))
