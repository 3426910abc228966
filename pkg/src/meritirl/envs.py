"""Goal-navigation gridworlds, random MDPs, goal-varying task families and experts.

Cells are indexed ``s = y * width + x``. Actions are 0: north (+y),
1: south (-y), 2: east (+x), 3: west (-x). A move succeeds with probability
``1 - slip_prob`` and slips to each perpendicular direction with
``slip_prob / 2``; moves into walls or off the grid leave the agent in place.
"""
from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field
from typing import Iterator

import numpy as np

from .mdp import FiniteMdp, MdpError, Trajectory, discounted_occupancy, policy_transition, rollout
from .rewards import RewardModel
from .soft import soft_value_iteration

MOVES = ((0, 1), (0, -1), (1, 0), (-1, 0))
PERPENDICULAR = ((2, 3), (2, 3), (0, 1), (0, 1))


@dataclass(frozen=True)
class GridworldSpec:
    width: int
    height: int
    goal: tuple = (0, 0)
    walls: tuple = ()
    slip_prob: float = 0.1
    step_cost: float = 0.0
    goal_reward: float = 1.0
    discount: float = 0.9
    feature_kind: str = "one_hot"
    rbf_centers: tuple = ()
    rbf_bandwidth: float = 1.0
    starts: tuple = ()  # start cells; empty means uniform over free cells
    goal_absorbing: bool = False

    def __post_init__(self):
        object.__setattr__(self, "goal", tuple(int(v) for v in self.goal))
        object.__setattr__(self, "walls", tuple(tuple(int(v) for v in c) for c in self.walls))
        object.__setattr__(self, "starts", tuple(tuple(int(v) for v in c) for c in self.starts))
        object.__setattr__(self, "rbf_centers", tuple(tuple(float(v) for v in c) for c in self.rbf_centers))
        if self.width < 1 or self.height < 1:
            raise MdpError("grid dimensions must be positive")
        if not 0.0 <= self.slip_prob < 1.0:
            raise MdpError("slip_prob must lie in [0, 1)")
        for cell in (self.goal,) + self.walls + self.starts:
            if not self.in_bounds(cell):
                raise MdpError(f"cell {cell} outside the {self.width}x{self.height} grid")
        if self.goal in self.walls:
            raise MdpError("goal cell is a wall")
        if any(c in self.walls for c in self.starts):
            raise MdpError("start cell is a wall")
        if self.feature_kind not in ("one_hot", "goal_distance_rbf"):
            raise MdpError(f"unknown feature_kind {self.feature_kind!r}")
        if self.feature_kind == "goal_distance_rbf" and (not self.rbf_centers or self.rbf_bandwidth <= 0):
            raise MdpError("rbf features need centers and a positive bandwidth")

    def in_bounds(self, cell) -> bool:
        return 0 <= cell[0] < self.width and 0 <= cell[1] < self.height

    def index(self, cell) -> int:
        return cell[1] * self.width + cell[0]

    def cell(self, s: int) -> tuple:
        return (s % self.width, s // self.width)

    @property
    def n_states(self) -> int:
        return self.width * self.height

    def with_goal(self, goal) -> "GridworldSpec":
        return GridworldSpec(**{**asdict(self), "goal": tuple(goal)})

    def to_json(self) -> str:
        return json.dumps(asdict(self))

    @classmethod
    def from_json(cls, text: str) -> "GridworldSpec":
        return cls(**json.loads(text))


@dataclass(frozen=True, eq=False)
class Gridworld:
    spec: GridworldSpec
    mdp: FiniteMdp
    model: RewardModel
    true_reward: np.ndarray
    goal_reachable: bool


def _transition(spec: GridworldSpec) -> np.ndarray:
    n = spec.n_states
    walls = set(spec.walls)
    p = np.zeros((n, 4, n))
    for s in range(n):
        here = spec.cell(s)
        if here in walls or (spec.goal_absorbing and here == spec.goal):
            p[s, :, s] = 1.0
            continue
        for a in range(4):
            outcomes = [(MOVES[a], 1.0 - spec.slip_prob)]
            outcomes += [(MOVES[b], spec.slip_prob / 2.0) for b in PERPENDICULAR[a]]
            for (dx, dy), prob in outcomes:
                nxt = (here[0] + dx, here[1] + dy)
                if not spec.in_bounds(nxt) or nxt in walls:
                    nxt = here
                p[s, a, spec.index(nxt)] += prob
    return p


def _initial(spec: GridworldSpec) -> np.ndarray:
    p0 = np.zeros(spec.n_states)
    if spec.starts:
        for c in spec.starts:
            p0[spec.index(c)] += 1.0
    else:
        walls = set(spec.walls)
        for s in range(spec.n_states):
            if spec.cell(s) not in walls:
                p0[s] = 1.0
    return p0 / p0.sum()


def _features(spec: GridworldSpec) -> RewardModel:
    n = spec.n_states
    if spec.feature_kind == "one_hot":
        return RewardModel.tabular(n, 4, index=np.repeat(np.arange(n)[:, None], 4, axis=1))
    cells = np.array([spec.cell(s) for s in range(n)], dtype=np.float64)
    centers = np.array(spec.rbf_centers)
    d2 = ((cells[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    phi = np.exp(-d2 / (2.0 * spec.rbf_bandwidth**2))
    return RewardModel.linear(np.repeat(phi[:, None, :], 4, axis=1))


def reachable_states(mdp: FiniteMdp, sources) -> np.ndarray:
    """Boolean mask of states reachable with positive probability from ``sources``."""
    adj = mdp.transition.max(axis=1) > 0
    seen = np.zeros(mdp.n_states, dtype=bool)
    frontier = list(sources)
    seen[frontier] = True
    while frontier:
        s = frontier.pop()
        for nxt in np.flatnonzero(adj[s] & ~seen):
            seen[nxt] = True
            frontier.append(int(nxt))
    return seen


def build_gridworld(spec: GridworldSpec) -> Gridworld:
    """MDP, reward features and ground-truth reward for ``spec``.

    ``goal_reachable`` is False when no start cell can reach the goal.
    """
    mdp = FiniteMdp(_transition(spec), _initial(spec), spec.discount, (spec.width, spec.height))
    reward = np.full((spec.n_states, 4), float(spec.step_cost))
    reward[spec.index(spec.goal)] = spec.goal_reward
    reach = reachable_states(mdp, np.flatnonzero(mdp.initial_dist > 0))
    return Gridworld(spec, mdp, _features(spec), reward, bool(reach[spec.index(spec.goal)]))


def default_map(goal=(8, 12), **overrides) -> GridworldSpec:
    """10 x 14 arena with two interior walls and a single entry cell at (0, 0).

    The lower wall leaves a gap on the east side and the upper wall a gap on
    the west side, so reaching the upper-right region takes a winding path.
    """
    walls = [(x, 4) for x in range(0, 8)] + [(x, 9) for x in range(2, 10)]
    base = dict(
        width=10, height=14, goal=goal, walls=tuple(walls), starts=((0, 0),),
        slip_prob=0.1, goal_reward=1.0, step_cost=0.0, discount=0.9,
    )
    base.update(overrides)
    return GridworldSpec(**base)


def default_goal_region(spec: GridworldSpec) -> list:
    """Free cells with ``x >= width - 4`` and ``y >= height - 3`` (upper-right corner)."""
    walls = set(spec.walls)
    return [
        (x, y)
        for y in range(spec.height - 3, spec.height)
        for x in range(spec.width - 4, spec.width)
        if (x, y) not in walls
    ]


# ---------------------------------------------------------------------------
# random MDPs


def random_mdp(n_states, n_actions, discount, rng, deterministic=False, concentration=1.0) -> FiniteMdp:
    """Dirichlet transition rows (or uniformly random successors when ``deterministic``)."""
    if deterministic:
        p = np.zeros((n_states, n_actions, n_states))
        nxt = rng.integers(0, n_states, size=(n_states, n_actions))
        p[np.arange(n_states)[:, None], np.arange(n_actions)[None, :], nxt] = 1.0
    else:
        p = rng.dirichlet(np.full(n_states, concentration), size=(n_states, n_actions))
    p0 = rng.dirichlet(np.ones(n_states))
    return FiniteMdp(p, p0, discount)


def random_policy(n_states, n_actions, rng) -> np.ndarray:
    return rng.dirichlet(np.ones(n_actions), size=n_states)


# ---------------------------------------------------------------------------
# experts, streams, tasks


def expert_policy(mdp: FiniteMdp, true_reward, temperature: float = 1.0) -> np.ndarray:
    """Soft Bellman policy of ``true_reward / temperature`` (temperature 1 is the model-consistent expert)."""
    if temperature <= 0:
        raise MdpError("temperature must be positive")
    return soft_value_iteration(mdp, np.asarray(true_reward) / temperature, method="policy").policy


def expert_stream(mdp: FiniteMdp, policy, T: int, rng) -> Iterator[tuple]:
    """Lazily yield ``T`` expert pairs, sampling each only when requested.

    Draws two uniforms per step (next state, then action) so the pairs agree
    with ``rollout(mdp, policy, None, T, rng)`` under the same seed.
    """
    if T < 1:
        raise MdpError("T must be >= 1")
    pi = np.asarray(policy, dtype=np.float64)
    cum_pi = np.cumsum(pi, axis=1)
    cum_p = mdp.cum_transition
    last_s = mdp.n_states - 1
    last_a = mdp.n_actions - 1

    def pick(cum, u, last):
        return min(int(np.searchsorted(cum, u, side="right")), last)

    s = a = None
    for t in range(T):
        u = rng.random(2)
        s = pick(mdp.cum_initial, u[0], last_s) if t == 0 else pick(cum_p[s, a], u[0], last_s)
        a = pick(cum_pi[s], u[1], last_a)
        yield s, a


@dataclass(frozen=True, eq=False)
class Evaluation:
    J_true: float
    success_rate: float | None


def success_probability(mdp: FiniteMdp, policy, goal_state: int, horizon: int) -> float:
    """Probability that the goal is visited at some step ``t < horizon`` (exact propagation)."""
    p_pi = policy_transition(mdp, policy)
    dist = mdp.initial_dist.copy()
    hit = 0.0
    for _ in range(horizon):
        hit += dist[goal_state]
        dist[goal_state] = 0.0
        dist = dist @ p_pi
    return float(min(1.0, hit))


def evaluate_policy(mdp, true_reward, policy, goal_state: int | None = None, horizon: int = 140) -> Evaluation:
    occ = discounted_occupancy(mdp, policy)
    success = None if goal_state is None else success_probability(mdp, policy, goal_state, horizon)
    return Evaluation(occ.expect(true_reward), success)


@dataclass(frozen=True, eq=False)
class MetaTask:
    """A goal-specific task: one training trajectory and ``m`` evaluation trajectories."""

    mdp: FiniteMdp
    model: RewardModel
    true_reward: np.ndarray
    expert: np.ndarray
    d_train: tuple
    d_eval: tuple
    goal: tuple | None = None
    goal_state: int | None = None

    def __post_init__(self):
        if len(self.d_train) != 1:
            raise MdpError("d_train must hold exactly one trajectory")
        if len(self.d_eval) < 1:
            raise MdpError("d_eval must hold at least one trajectory")


@dataclass(frozen=True, eq=False)
class TaskDistribution:
    """Gridworld tasks sharing dynamics and features; only the goal varies."""

    base: GridworldSpec
    goals: tuple
    weights: tuple | None = None
    horizon: int = 140
    expert_temperature: float = 1.0
    _worlds: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self.goals:
            raise MdpError("goal set must be nonempty")
        for g in self.goals:
            self.base.with_goal(g)  # validates the cell
        if self.weights is not None and len(self.weights) != len(self.goals):
            raise MdpError("weights must match goals")

    def world(self, goal) -> Gridworld:
        goal = tuple(goal)
        if goal not in self._worlds:
            self._worlds[goal] = build_gridworld(self.base.with_goal(goal))
        return self._worlds[goal]

    def sample_goal(self, rng) -> tuple:
        p = None
        if self.weights is not None:
            p = np.asarray(self.weights, dtype=np.float64)
            p = p / p.sum()
        return tuple(self.goals[int(rng.choice(len(self.goals), p=p))])

    def task_for_goal(self, goal, m_eval: int, rng) -> MetaTask:
        world = self.world(goal)
        pi = expert_policy(world.mdp, world.true_reward, self.expert_temperature)
        d_train = (rollout(world.mdp, pi, None, self.horizon, rng),)
        d_eval = tuple(rollout(world.mdp, pi, None, self.horizon, rng) for _ in range(m_eval))
        return MetaTask(
            world.mdp, world.model, world.true_reward, pi, d_train, d_eval,
            tuple(goal), self.base.index(tuple(goal)),
        )


def sample_meta_task(dist: TaskDistribution, m_eval: int, rng) -> MetaTask:
    """Draw a goal, build its expert and roll out the train/eval demonstrations."""
    if m_eval < 1:
        raise MdpError("m_eval must be >= 1")
    return dist.task_for_goal(dist.sample_goal(rng), m_eval, rng)


def dump_task(task: MetaTask, directory: str) -> None:
    """Write ``task.json``, ``d_train.csv`` and ``d_eval_<i>.csv`` into ``directory``."""
    os.makedirs(directory, exist_ok=True)
    meta = {
        "schema": "meritirl.task/1",
        "mdp": task.mdp.to_dict(),
        "goal": list(task.goal) if task.goal is not None else None,
        "true_reward": task.true_reward.tolist(),
        "expert_policy": task.expert.tolist(),
    }
    with open(os.path.join(directory, "task.json"), "w") as fh:
        json.dump(meta, fh)
    with open(os.path.join(directory, "d_train.csv"), "w") as fh:
        fh.write(task.d_train[0].to_csv())
    for i, traj in enumerate(task.d_eval):
        with open(os.path.join(directory, f"d_eval_{i}.csv"), "w") as fh:
            fh.write(traj.to_csv())


def load_trajectory(path: str) -> Trajectory:
    with open(path) as fh:
        return Trajectory.from_csv(fh.read())
