"""Finite MDPs, trajectory sampling and exact distributional computations.

Occupancies are computed by solving the discounted flow equations directly,
so every downstream quantity (feature expectations, policy values, causal
entropy) is exact up to linear-solve round-off.
"""
from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Union

import numpy as np

from . import kernels

PROB_TOL = 1e-12
FLOW_TOL = 1e-9

MDP_SCHEMA = "meritirl.mdp/1"
OCCUPANCY_SCHEMA = "meritirl.occupancy/1"


class MdpError(ValueError):
    """Invalid MDP, policy, start specification or distribution."""


def make_rng(seed) -> np.random.Generator:
    """Seeded PCG64 generator; identical seeds give identical streams."""
    return np.random.default_rng(seed)


def _check_distribution(p, name, tol=PROB_TOL):
    p = np.asarray(p, dtype=np.float64)
    if not np.all(np.isfinite(p)):
        raise MdpError(f"{name} has non-finite entries")
    if np.any(p < 0):
        raise MdpError(f"{name} has negative entries")
    sums = p.sum(axis=-1)
    if np.any(np.abs(sums - 1.0) > tol):
        raise MdpError(f"{name} does not sum to 1 (max deviation {np.max(np.abs(sums - 1.0)):.3e})")
    return p


def _freeze(a):
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class FiniteMdp:
    """Transition kernel ``P[s, a, s']``, initial distribution and discount."""

    transition: np.ndarray
    initial_dist: np.ndarray
    discount: float
    # optional grid geometry (width, height) for gridworld-derived MDPs
    grid_shape: tuple | None = field(default=None)

    def __post_init__(self):
        p = np.asarray(self.transition, dtype=np.float64)
        if p.ndim != 3 or p.shape[0] != p.shape[2] or p.shape[0] < 1 or p.shape[1] < 1:
            raise MdpError(f"transition must have shape (S, A, S), got {p.shape}")
        _check_distribution(p, "transition rows")
        p0 = np.asarray(self.initial_dist, dtype=np.float64)
        if p0.shape != (p.shape[0],):
            raise MdpError(f"initial_dist must have length {p.shape[0]}")
        _check_distribution(p0, "initial_dist")
        if not (0.0 <= float(self.discount) < 1.0):
            raise MdpError(f"discount must lie in [0, 1), got {self.discount}")
        object.__setattr__(self, "transition", _freeze(p))
        object.__setattr__(self, "initial_dist", _freeze(p0))
        object.__setattr__(self, "discount", float(self.discount))

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transition.shape[1]

    @cached_property
    def cum_transition(self) -> np.ndarray:
        return np.ascontiguousarray(np.cumsum(self.transition, axis=2))

    @cached_property
    def cum_initial(self) -> np.ndarray:
        return np.ascontiguousarray(np.cumsum(self.initial_dist))

    def with_discount(self, discount: float) -> "FiniteMdp":
        return FiniteMdp(self.transition, self.initial_dist, discount, self.grid_shape)

    def with_initial(self, initial_dist) -> "FiniteMdp":
        return FiniteMdp(self.transition, initial_dist, self.discount, self.grid_shape)

    # serialization --------------------------------------------------------

    def to_dict(self) -> dict:
        out = {
            "schema": MDP_SCHEMA,
            "n_states": self.n_states,
            "n_actions": self.n_actions,
            "discount": self.discount,
            "initial_dist": self.initial_dist.tolist(),
            "transition": self.transition.tolist(),
        }
        if self.grid_shape is not None:
            out["grid_shape"] = list(self.grid_shape)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "FiniteMdp":
        if data.get("schema", MDP_SCHEMA) != MDP_SCHEMA:
            raise MdpError(f"unsupported MDP schema {data.get('schema')!r}")
        mdp = cls(
            np.asarray(data["transition"], dtype=np.float64),
            np.asarray(data["initial_dist"], dtype=np.float64),
            data["discount"],
            tuple(data["grid_shape"]) if data.get("grid_shape") else None,
        )
        if mdp.n_states != data.get("n_states", mdp.n_states) or mdp.n_actions != data.get(
            "n_actions", mdp.n_actions
        ):
            raise MdpError("n_states/n_actions disagree with transition shape")
        return mdp

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "FiniteMdp":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Ordered (state, action) pairs; ``start_time`` is the MDP time of step 0."""

    states: np.ndarray
    actions: np.ndarray
    start_time: int = 0

    def __post_init__(self):
        s = np.asarray(self.states, dtype=np.int64).reshape(-1)
        a = np.asarray(self.actions, dtype=np.int64).reshape(-1)
        if s.shape != a.shape:
            raise MdpError("states and actions must have equal length")
        if self.start_time < 0:
            raise MdpError("start_time must be nonnegative")
        s.setflags(write=False)
        a.setflags(write=False)
        object.__setattr__(self, "states", s)
        object.__setattr__(self, "actions", a)

    @classmethod
    def from_pairs(cls, pairs: Iterable, start_time: int = 0) -> "Trajectory":
        pairs = list(pairs)
        if not pairs:
            return cls(np.zeros(0, np.int64), np.zeros(0, np.int64), start_time)
        s, a = zip(*pairs)
        return cls(np.array(s), np.array(a), start_time)

    def __len__(self) -> int:
        return len(self.states)

    def pairs(self) -> list[tuple[int, int]]:
        return list(zip(self.states.tolist(), self.actions.tolist()))

    def prefix(self, n: int) -> "Trajectory":
        return Trajectory(self.states[:n], self.actions[:n], self.start_time)

    def append(self, s: int, a: int) -> "Trajectory":
        return Trajectory(np.append(self.states, s), np.append(self.actions, a), self.start_time)

    def check_bounds(self, mdp: FiniteMdp) -> None:
        if len(self) and (
            self.states.min() < 0
            or self.states.max() >= mdp.n_states
            or self.actions.min() < 0
            or self.actions.max() >= mdp.n_actions
        ):
            raise MdpError("trajectory indices out of MDP bounds")

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("t,state,action\n")
        for i, (s, a) in enumerate(self.pairs()):
            buf.write(f"{self.start_time + i},{s},{a}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "Trajectory":
        rows = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
        if not rows or rows[0].strip() != "t,state,action":
            raise MdpError("trajectory CSV must start with header 't,state,action'")
        body = [tuple(int(x) for x in ln.split(",")) for ln in rows[1:]]
        start = body[0][0] if body else 0
        return cls.from_pairs([(s, a) for _, s, a in body], start_time=start)


@dataclass(frozen=True)
class Start:
    """Where a rollout or occupancy starts: ``initial`` (P0), a state, or a pair."""

    kind: str = "initial"
    state: int = -1
    action: int = -1

    @classmethod
    def initial(cls) -> "Start":
        return cls("initial")

    @classmethod
    def at_state(cls, s: int) -> "Start":
        return cls("state", int(s))

    @classmethod
    def at_pair(cls, s: int, a: int) -> "Start":
        return cls("state_action", int(s), int(a))


StartLike = Union[Start, None, int, tuple]


def resolve_start(mdp: FiniteMdp, start: StartLike) -> Start:
    if start is None:
        start = Start.initial()
    elif isinstance(start, (int, np.integer)):
        start = Start.at_state(int(start))
    elif isinstance(start, tuple):
        start = Start.at_pair(*start)
    if start.kind == "initial":
        return start
    if start.kind not in ("state", "state_action"):
        raise MdpError(f"unknown start kind {start.kind!r}")
    if not 0 <= start.state < mdp.n_states:
        raise MdpError(f"start state {start.state} out of range")
    if start.kind == "state_action" and not 0 <= start.action < mdp.n_actions:
        raise MdpError(f"start action {start.action} out of range")
    return start


def check_policy(mdp: FiniteMdp, policy) -> np.ndarray:
    """Validate an ``(S, A)`` row-stochastic policy table and return it as an array."""
    pi = np.asarray(policy, dtype=np.float64)
    if pi.shape != (mdp.n_states, mdp.n_actions):
        raise MdpError(f"policy must have shape {(mdp.n_states, mdp.n_actions)}, got {pi.shape}")
    return _check_distribution(pi, "policy rows")


def truncation_horizon(discount: float, bound: float = 1.0, tail_tol: float = 1e-8) -> int:
    """Smallest H >= 1 with ``discount**H * bound / (1 - discount) <= tail_tol``."""
    if discount == 0.0 or bound == 0.0:
        return 1
    target = tail_tol * (1.0 - discount) / bound
    if target >= 1.0:
        return 1
    return max(1, math.ceil(math.log(target) / math.log(discount)))


# ---------------------------------------------------------------------------
# sampling


def _start_arrays(mdp, start):
    if start.kind == "initial":
        return mdp.cum_initial, -1
    cum = np.zeros(mdp.n_states)
    cum[start.state:] = 1.0
    return cum, start.action if start.kind == "state_action" else -1


def sample_paths(mdp: FiniteMdp, policy, start: StartLike, horizon: int, n: int, rng):
    """Draw ``n`` independent rollouts; returns ``(states, actions)`` of shape (n, H).

    Consumes exactly ``n * horizon * 2`` uniforms from ``rng``.
    """
    if horizon < 1:
        raise MdpError("horizon must be >= 1")
    pi = check_policy(mdp, policy)
    start = resolve_start(mdp, start)
    cum_start, first_action = _start_arrays(mdp, start)
    cum_pi = np.ascontiguousarray(np.cumsum(pi, axis=1))
    uniforms = rng.random((n, horizon, 2))
    return kernels.sample_rollouts(cum_start, mdp.cum_transition, cum_pi, uniforms, first_action)


def rollout(mdp: FiniteMdp, policy, start: StartLike, horizon: int, rng) -> Trajectory:
    """Sample one trajectory of exactly ``horizon`` steps."""
    states, actions = sample_paths(mdp, policy, start, horizon, 1, rng)
    return Trajectory(states[0], actions[0])


def discounted_pair_counts(mdp: FiniteMdp, states, actions, start_power: int = 0) -> np.ndarray:
    """Per-path discounted visit counts ``sum_i gamma^(i+start_power) 1[(s_i,a_i)=(s,a)]``.

    Returns an ``(n, S*A)`` array.
    """
    states = np.ascontiguousarray(np.atleast_2d(states), dtype=np.int64)
    actions = np.ascontiguousarray(np.atleast_2d(actions), dtype=np.int64)
    powers = mdp.discount ** (start_power + np.arange(states.shape[1], dtype=np.float64))
    return kernels.discounted_counts(states, actions, mdp.n_states, mdp.n_actions, powers)


# ---------------------------------------------------------------------------
# exact distributions


def policy_transition(mdp: FiniteMdp, policy) -> np.ndarray:
    """State-to-state kernel ``P_pi[s, s'] = sum_a pi(a|s) P(s'|s,a)``."""
    pi = np.asarray(policy, dtype=np.float64)
    return np.einsum("sa,sat->st", pi, mdp.transition)


def state_occupancy_matrix(mdp: FiniteMdp, policy) -> np.ndarray:
    """``(I - gamma P_pi)^-1``: row ``s`` is the discounted state visitation from ``s``."""
    p_pi = policy_transition(mdp, policy)
    return np.linalg.solve(np.eye(mdp.n_states) - mdp.discount * p_pi, np.eye(mdp.n_states))


@dataclass(frozen=True, eq=False)
class DiscountedOccupancy:
    """``d[s, a] = sum_t gamma^t P_t(s, a)`` and its normalisation ``mu = (1 - gamma) d``."""

    d: np.ndarray
    discount: float
    residual: float = 0.0

    @property
    def mu(self) -> np.ndarray:
        return (1.0 - self.discount) * self.d

    @property
    def state_mu(self) -> np.ndarray:
        return self.mu.sum(axis=1)

    def expect(self, f) -> float:
        """``E[sum_t gamma^t f(S_t, A_t)]`` for an ``(S, A)`` table ``f``."""
        return float(np.sum(self.d * np.asarray(f)))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# schema: {OCCUPANCY_SCHEMA}\n")
        buf.write("state,action,mu,d\n")
        mu = self.mu
        for s in range(self.d.shape[0]):
            for a in range(self.d.shape[1]):
                buf.write(f"{s},{a},{mu[s, a]!r},{self.d[s, a]!r}\n")
        return buf.getvalue()


def start_mass(mdp: FiniteMdp, policy, start: StartLike) -> np.ndarray:
    """Time-0 state-action distribution implied by ``start``."""
    pi = np.asarray(policy, dtype=np.float64)
    start = resolve_start(mdp, start)
    if start.kind == "initial":
        return mdp.initial_dist[:, None] * pi
    if start.kind == "state":
        out = np.zeros_like(pi)
        out[start.state] = pi[start.state]
        return out
    out = np.zeros_like(pi)
    out[start.state, start.action] = 1.0
    return out


def flow_residual(mdp: FiniteMdp, policy, start: StartLike, d) -> float:
    """Sup-norm violation of ``d = start + gamma * (P^T d) * pi``."""
    pi = np.asarray(policy, dtype=np.float64)
    inflow = np.einsum("sa,sat->t", d, mdp.transition)
    rhs = start_mass(mdp, pi, start) + mdp.discount * inflow[:, None] * pi
    return float(np.max(np.abs(d - rhs)))


def discounted_occupancy(mdp: FiniteMdp, policy, start: StartLike = None) -> DiscountedOccupancy:
    """Exact discounted state-action occupancy by a direct linear solve."""
    pi = check_policy(mdp, policy)
    base = start_mass(mdp, pi, start)
    first = np.einsum("sa,sat->t", base, mdp.transition)
    # state inflow x solves (I - gamma P_pi^T) x = P^T base
    x = np.linalg.solve(np.eye(mdp.n_states) - mdp.discount * policy_transition(mdp, pi).T, first)
    d = base + mdp.discount * x[:, None] * pi
    residual = flow_residual(mdp, pi, start, d)
    if residual > FLOW_TOL * max(1.0, 1.0 / (1.0 - mdp.discount)):
        raise RuntimeError(f"occupancy flow residual {residual:.3e} exceeds tolerance")
    return DiscountedOccupancy(d, mdp.discount, residual)


def stationary_distribution(mdp: FiniteMdp, policy) -> tuple[np.ndarray, np.ndarray]:
    """Discounted visitation distributions ``(mu(s), mu(s, a))`` from ``initial_dist``."""
    occ = discounted_occupancy(mdp, policy, None)
    mu_sa = occ.mu
    return mu_sa.sum(axis=1), mu_sa


def chain_limit(mdp: FiniteMdp, policy) -> np.ndarray:
    """Stationary law of the policy-induced chain (assumes it is unique)."""
    p_pi = policy_transition(mdp, policy)
    n = mdp.n_states
    a = np.vstack([np.eye(n) - p_pi.T, np.ones((1, n))])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    sol, *_ = np.linalg.lstsq(a, b, rcond=None)
    sol = np.clip(sol, 0.0, None)
    return sol / sol.sum()


def total_variation(p, q) -> float:
    """``0.5 * sum |p - q|`` between two probability vectors."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape or p.ndim != 1:
        raise MdpError(f"length mismatch: {p.shape} vs {q.shape}")
    _check_distribution(p, "p", tol=1e-9)
    _check_distribution(q, "q", tol=1e-9)
    return float(min(1.0, 0.5 * np.abs(p - q).sum()))


@dataclass(frozen=True)
class ErgodicityRecord:
    tv: np.ndarray
    rate: float
    degenerate: bool


def ergodicity_probe(mdp: FiniteMdp, policy, horizon: int, reference: str = "discounted") -> ErgodicityRecord:
    """Total-variation decay ``t -> d_TV(P_t, mu)`` for ``t < horizon`` by exact propagation.

    ``reference="discounted"`` compares against the discounted visitation
    distribution; ``reference="limit"`` against the stationary law of the
    policy-induced chain. ``rate`` is ``exp`` of the least-squares slope of
    ``log d_TV`` over entries above 1e-12; when fewer than two entries
    qualify, ``rate`` is 0 and ``degenerate`` is set.
    """
    if horizon < 2:
        raise MdpError("horizon must be >= 2")
    pi = check_policy(mdp, policy)
    if reference == "discounted":
        target = stationary_distribution(mdp, pi)[0]
    elif reference == "limit":
        target = chain_limit(mdp, pi)
    else:
        raise MdpError(f"unknown reference {reference!r}")
    p_pi = policy_transition(mdp, pi)
    p_t = mdp.initial_dist.copy()
    tv = np.empty(horizon)
    for t in range(horizon):
        tv[t] = 0.5 * np.abs(p_t - target).sum()
        p_t = p_t @ p_pi
    keep = tv > 1e-12
    if keep.sum() < 2:
        return ErgodicityRecord(tv, 0.0, True)
    ts = np.arange(horizon)[keep]
    slope = np.polyfit(ts, np.log(tv[keep]), 1)[0]
    return ErgodicityRecord(tv, float(math.exp(slope)), False)
