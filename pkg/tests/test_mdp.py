import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import bandit, cycle, self_loop
from meritirl import envs
from meritirl.mdp import (
    FiniteMdp,
    MdpError,
    Start,
    Trajectory,
    discounted_occupancy,
    discounted_pair_counts,
    ergodicity_probe,
    flow_residual,
    rollout,
    sample_paths,
    stationary_distribution,
    total_variation,
)


def test_rejects_bad_rows():
    p = np.full((2, 1, 2), 0.6)
    with pytest.raises(MdpError):
        FiniteMdp(p, np.array([0.5, 0.5]), 0.9)


def test_rejects_discount_one():
    with pytest.raises(MdpError):
        FiniteMdp(np.ones((1, 1, 1)), np.ones(1), 1.0)


def test_json_round_trip(rng):
    mdp = envs.random_mdp(4, 2, 0.8, rng)
    back = FiniteMdp.from_json(mdp.to_json())
    assert np.array_equal(back.transition, mdp.transition)
    assert back.discount == mdp.discount


def test_rollout_self_loop(rng):
    traj = rollout(self_loop(), np.ones((1, 1)), None, 3, rng)
    assert traj.pairs() == [(0, 0)] * 3


def test_rollout_cycle(rng):
    traj = rollout(cycle(), np.ones((2, 1)), Start.at_state(0), 4, rng)
    assert traj.pairs() == [(0, 0), (1, 0), (0, 0), (1, 0)]


def test_rollout_seeded_is_deterministic():
    world = envs.build_gridworld(envs.GridworldSpec(5, 5, goal=(4, 4), slip_prob=0.1))
    pi = np.full((25, 4), 0.25)
    a = rollout(world.mdp, pi, None, 50, np.random.default_rng(42))
    b = rollout(world.mdp, pi, None, 50, np.random.default_rng(42))
    assert np.array_equal(a.states, b.states) and np.array_equal(a.actions, b.actions)


def test_trajectory_csv_round_trip():
    traj = Trajectory.from_pairs([(0, 1), (2, 3)], start_time=4)
    back = Trajectory.from_csv(traj.to_csv())
    assert back.pairs() == traj.pairs() and back.start_time == 4


def test_occupancy_self_loop():
    occ = discounted_occupancy(self_loop(0.9), np.ones((1, 1)))
    assert occ.mu[0, 0] == pytest.approx(1.0, abs=1e-12)
    assert occ.d[0, 0] == pytest.approx(10.0, abs=1e-12)


def test_occupancy_cycle():
    occ = discounted_occupancy(cycle(0.5), np.ones((2, 1)))
    assert occ.mu[:, 0] == pytest.approx([2 / 3, 1 / 3], abs=1e-12)


def test_occupancy_normalised_and_flow(rng):
    for _ in range(5):
        mdp = envs.random_mdp(6, 3, float(rng.uniform(0, 0.99)), rng)
        pi = envs.random_policy(6, 3, rng)
        for start in (None, Start.at_state(2), Start.at_pair(1, 2)):
            occ = discounted_occupancy(mdp, pi, start)
            assert occ.mu.sum() == pytest.approx(1.0, abs=1e-10)
            assert flow_residual(mdp, pi, start, occ.d) <= 1e-9


def test_stationary_distribution():
    mu_s, _ = stationary_distribution(self_loop(), np.ones((1, 1)))
    assert mu_s == pytest.approx([1.0])
    mu_s, _ = stationary_distribution(cycle(0.5), np.ones((2, 1)))
    assert mu_s == pytest.approx([2 / 3, 1 / 3], abs=1e-12)


def test_stationary_marginal(rng):
    mdp = envs.random_mdp(6, 3, 0.9, rng)
    pi = envs.random_policy(6, 3, rng)
    mu_s, mu_sa = stationary_distribution(mdp, pi)
    assert np.allclose(mu_sa.sum(axis=1), mu_s, atol=1e-14)


def test_occupancy_matches_rollouts(rng):
    mdp = envs.random_mdp(5, 2, 0.8, rng)
    pi = envs.random_policy(5, 2, rng)
    f = rng.uniform(-1, 1, (5, 2))
    horizon, n = 60, 10_000
    states, actions = sample_paths(mdp, pi, Start.initial(), horizon, n, rng)
    sums = discounted_pair_counts(mdp, states, actions) @ f.reshape(-1)
    exact = discounted_occupancy(mdp, pi).expect(f)
    tail = mdp.discount**horizon * np.abs(f).max() / (1 - mdp.discount)
    assert abs(sums.mean() - exact) <= 3 * sums.std(ddof=1) / np.sqrt(n) + tail


def test_total_variation_examples():
    assert total_variation([0.3, 0.7], [0.3, 0.7]) == 0.0
    assert total_variation([1.0, 0.0], [0.0, 1.0]) == 1.0
    assert total_variation([0.5, 0.5], [1.0, 0.0]) == 0.5
    with pytest.raises(MdpError):
        total_variation([1.0], [0.5, 0.5])


def _dist(draw, n):
    w = np.array(draw(st.lists(st.floats(0.01, 1.0), min_size=n, max_size=n)))
    return w / w.sum()


@settings(max_examples=100, deadline=None)
@given(st.data())
def test_total_variation_metric(data):
    p, q, r = (_dist(data.draw, 4) for _ in range(3))
    d_pq = total_variation(p, q)
    assert 0.0 <= d_pq <= 1.0
    assert d_pq == pytest.approx(total_variation(q, p), abs=1e-15)
    assert total_variation(p, r) <= d_pq + total_variation(q, r) + 1e-12


def test_ergodicity_single_state():
    rec = ergodicity_probe(self_loop(), np.ones((1, 1)), 5)
    assert np.all(rec.tv == 0.0) and rec.degenerate and rec.rate == 0.0


def test_ergodicity_uniform_rows():
    mdp = FiniteMdp(np.full((2, 1, 2), 0.5), np.array([1.0, 0.0]), 0.9)
    rec = ergodicity_probe(mdp, np.ones((2, 1)), 6, reference="limit")
    assert np.all(rec.tv[1:] <= 1e-15)


def test_ergodicity_gridworld_decay():
    # start in a corner: uniform P0 is already stationary for the uniform policy
    world = envs.build_gridworld(envs.GridworldSpec(5, 5, goal=(4, 4), slip_prob=0.2, starts=((0, 0),)))
    rec = ergodicity_probe(world.mdp, np.full((25, 4), 0.25), 200, reference="limit")
    tail = rec.tv[20:]
    assert np.all(np.diff(tail) <= 1e-12)
    assert 0.0 < rec.rate < 1.0


def test_ergodicity_short_horizon():
    with pytest.raises(MdpError):
        ergodicity_probe(self_loop(), np.ones((1, 1)), 1)
