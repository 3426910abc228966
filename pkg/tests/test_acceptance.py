"""Acceptance criteria 1-11.

Each test records one PASS/FAIL line (collected in the terminal summary) and
then asserts. Expensive experiment runs are cached per session so that the
iterate-bound criterion can inspect every run made here.
"""
import functools
import os
import subprocess
import sys
import time

import numpy as np
import pytest

from conftest import record_criterion
from meritirl import envs, experiment
from meritirl.config import load_config
from meritirl.mdp import rollout
from meritirl.meta import MetaConfig, adapt_task, task_optimum
from meritirl.online import (
    MeritConfig,
    OnlineState,
    StepSchedule,
    estimate_gradient,
    exact_prefix_gradient,
    finite_difference_gradient,
    initial_state,
    merit_step,
    soft_gradients,
    stationary_objective,
)
from meritirl.oracles import check_contraction
from meritirl.rewards import RewardModel
from meritirl.soft import policy_improvement, soft_policy_evaluation, soft_q_operator

# iterate-bound observations: (label, max ||theta_t - prior||, bound)
ITERATE_RUNS = []


@functools.lru_cache(maxsize=None)
def regret_report(schedule):
    t0 = time.perf_counter()
    report = experiment.regret_sweep(load_config(None, environ={}), schedule=schedule)
    report["runtime"] = time.perf_counter() - t0
    return report


@functools.lru_cache(maxsize=None)
def goal_summary(out_dir):
    cfg = load_config(None, environ={})
    summary = experiment.run_experiment(cfg, out_dir, kinds=["merit", "it_irl", "naive_merit", "naive_it"])
    return summary, cfg


@pytest.fixture(scope="session")
def goal_run(tmp_path_factory):
    out = str(tmp_path_factory.mktemp("goal_family"))
    return goal_summary(out), out


def test_criterion_01_prefix_gradient_oracle():
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(20):
        spec = envs.GridworldSpec(5, 5, goal=(4, 4), slip_prob=0.1, discount=0.9)
        mdp = envs.build_gridworld(spec).mdp
        n = int(rng.integers(2, 31))
        model = RewardModel.linear(rng.standard_normal((25, 4, n)))
        cfg = MeritConfig(0.5, 0.3 * rng.standard_normal(n), StepSchedule("sqrt_decay", 0.9, 0.5))
        expert = envs.random_policy(25, 4, rng)
        prefix = rollout(mdp, expert, None, int(rng.integers(3, 11)), rng)
        theta = rng.standard_normal(n)
        exact = exact_prefix_gradient(model, mdp, theta, prefix, cfg)
        fd = finite_difference_gradient(model, mdp, theta, prefix, cfg, eps=1e-5)
        worst = max(worst, np.max(np.abs(exact - fd)) / (1 + np.max(np.abs(exact))))
    runtime = time.perf_counter() - t0
    ok = worst <= 1e-5 and runtime < 60
    record_criterion(1, "prefix gradient vs finite differences", ok,
                     f"max rel err {worst:.2e} <= 1e-5, runtime {runtime:.1f}s < 60s")
    assert ok


def test_criterion_02_contraction():
    t0 = time.perf_counter()
    res = check_contraction(np.random.default_rng(2), n_mdps=10, n_pairs=10)
    runtime = time.perf_counter() - t0
    ok = res.passed and runtime < 5
    record_criterion(2, "soft Bellman contraction", ok,
                     f"max excess {res.discrepancy:.1e} (rounding slack 1e-12) over 100 pairs, runtime {runtime:.2f}s < 5s")
    assert ok


def test_criterion_03_policy_improvement():
    rng = np.random.default_rng(3)
    worst = -np.inf
    for _ in range(5):
        mdp = envs.random_mdp(6, 3, 0.9, rng)
        model = RewardModel.linear(rng.standard_normal((6, 3, 4)))
        expert = envs.random_policy(6, 3, rng)
        lam = 0.5
        cfg = MeritConfig(lam, 0.3 * rng.standard_normal(4), StepSchedule("sqrt_decay", 0.9, lam))
        state = initial_state(model, mdp, cfg)
        dists = []
        for pair in envs.expert_stream(mdp, expert, 50, rng):
            reward = model.reward_table(state.theta)
            q_t = soft_policy_evaluation(mdp, reward, state.policy)
            nxt = merit_step(model, mdp, state, pair, cfg, rng)
            assert np.array_equal(nxt.policy, policy_improvement(q_t))
            gap = soft_q_operator(mdp, reward, q_t) - soft_policy_evaluation(mdp, reward, nxt.policy)
            worst = max(worst, float(gap.max()))
            state = nxt
            dists.append(np.linalg.norm(state.theta - cfg.meta_prior))
        ITERATE_RUNS.append(("improvement task", max(dists), 2 * model.grad_norm_bound / lam))
    ok = worst <= 1e-8
    record_criterion(3, "policy improvement along MERIT steps", ok,
                     f"max (T Q_t - Q_t+1) {worst:.2e} <= 1e-8 over 5 tasks x 50 steps")
    assert ok


def test_criterion_05_unbiased_estimator():
    rng = np.random.default_rng(5)
    spec = envs.GridworldSpec(4, 4, goal=(3, 3), slip_prob=0.2, discount=0.9, feature_kind="goal_distance_rbf",
                              rbf_centers=((0, 0), (3, 0), (0, 3), (3, 3), (1.5, 1.5)), rbf_bandwidth=1.5)
    world = envs.build_gridworld(spec)
    n = world.model.dim
    theta = rng.standard_normal(n)
    prior = 0.5 * rng.standard_normal(n)
    sched = StepSchedule("sqrt_decay", 0.9, 1.0)
    sampled_cfg = MeritConfig(1.0, prior, sched)
    exact_cfg = MeritConfig(1.0, prior, sched, estimator_mode="exact")
    policy = soft_gradients(world.model, world.mdp, theta).policy  # exact lower-level solution
    prefix = rollout(world.mdp, envs.expert_policy(world.mdp, 3.0 * world.true_reward), None, 5, rng)
    state = OnlineState(4, theta, policy, prefix.prefix(4))
    pair = (int(prefix.states[4]), int(prefix.actions[4]))
    draws = np.array([estimate_gradient(world.model, world.mdp, state, pair, policy, sampled_cfg, rng)
                      for _ in range(20_000)])
    exact = estimate_gradient(world.model, world.mdp, state, pair, policy, exact_cfg, rng)
    z = np.abs(draws.mean(axis=0) - exact) / (draws.std(axis=0, ddof=1) / np.sqrt(len(draws)))
    ok = bool(np.all(z <= 3.0))
    record_criterion(5, "sampled gradient unbiasedness", ok,
                     f"max |z| {z.max():.2f} <= 3 over {n} coordinates, 20000 draws")
    assert ok


def test_criterion_06_sublinear_local_regret():
    rep = regret_report("sqrt_decay")
    for p in rep["per_seed"]:
        ITERATE_RUNS.append((f"regret sqrt_decay seed {p['seed']}", p["max_theta_dist"], rep["bound"]))
    ratios = rep["mean_ratios"]
    ok = all(ratios[str(t)] < 2.0 for t in (250, 500, 1000)) and rep["runtime"] < 600
    detail = ", ".join(f"R({2 * t})/R({t})={ratios[str(t)]:.4f}" for t in (250, 500, 1000))
    record_criterion(6, "sub-linear local regret", ok,
                     f"{detail} (< 2, mean of {len(rep['per_seed'])} seeds), runtime {rep['runtime']:.0f}s < 600s")
    assert ok


def test_criterion_07_log_regret_linear_reward():
    rep = regret_report("linear_reward_decay")
    reg = load_config(None, environ={})["regret"]
    world, _, expert = experiment.regret_world(reg)
    lam = float(reg["lam"])
    cfg = MeritConfig(lam, np.zeros(world.model.dim), StepSchedule("linear_reward_decay", world.mdp.discount, lam))
    _, grad = stationary_objective(world.model, world.mdp, np.array(rep["theta_star"]), expert, cfg)
    late, early = rep["mean_windows"]["1000-2000"], rep["mean_windows"]["500-1000"]
    ok = late <= 1.25 * early and np.linalg.norm(grad) <= 1e-8
    record_criterion(7, "logarithmic loss regret (linear reward)", ok,
                     f"R(2000)-R(1000)={late:.3e} <= 1.25 x (R(1000)-R(500)={early:.3e}); "
                     f"comparator |grad|={np.linalg.norm(grad):.1e} <= 1e-8")
    assert ok


def test_criterion_08_adaptation_rate():
    spec = envs.GridworldSpec(4, 4, goal=(3, 3), slip_prob=0.1, discount=0.9)
    goals = tuple((x, y) for x in range(4) for y in range(4) if x + y >= 4)
    dist = envs.TaskDistribution(spec, goals, horizon=60)
    lam = 1.0
    replicates = 20
    at_200, at_400 = [], []
    for j in range(10):
        task = envs.sample_meta_task(dist, 3, np.random.default_rng(100 + j))
        cfg = MetaConfig.for_model(task.model, 0.9, lam, eta=0.6 * lam, K=400)
        prior = np.zeros(task.model.dim)
        star = task_optimum(task.model, task, prior, cfg, gtol=1e-9)
        for r in range(replicates):
            res = adapt_task(task.model, task, prior, cfg, "sampled", np.random.default_rng(1000 * j + r),
                             keep_path=True)
            at_200.append(np.sum((res.path[200] - star) ** 2))
            at_400.append(np.sum((res.path[400] - star) ** 2))
    ratio = np.mean(at_400) / np.mean(at_200)
    ok = ratio <= 0.6
    record_criterion(8, "meta adaptation rate", ok,
                     f"E|phi_400 - phi*|^2 / E|phi_200 - phi*|^2 = {ratio:.3f} <= 0.6 "
                     f"(10 tasks x {replicates} sampled runs)")
    assert ok


def _iterate_runs_from_goal(goal_run):
    (summary, cfg), out = goal_run
    dist = experiment.build_distribution(cfg)
    bound = 2.0 * dist.world(dist.goals[0]).model.grad_norm_bound / float(cfg["learner"]["lam"])
    for seed in cfg["learner"]["seeds"]:
        path = os.path.join(out, f"merit_seed{seed}.csv")
        rows = [ln.split(",") for ln in open(path).read().splitlines()[2:]]
        ITERATE_RUNS.append((f"goal family merit seed {seed}", max(float(r[5]) for r in rows), bound))


def test_criterion_09_meta_prior_ordering(goal_run):
    (summary, cfg), _ = goal_run
    b = summary["baselines"]
    at = {k: b[k]["J_true_at"]["0.6"] for k in b}
    fin = {k: b[k]["final_J_true"]["mean"] for k in b}
    ok = at["merit"] >= at["it_irl"] and fin["merit"] >= fin["it_irl"] >= fin["naive_it"]
    record_criterion(9, "meta-prior ordering", ok,
                     f"J(0.6T) merit {at['merit']:.4f} >= it_irl {at['it_irl']:.4f}; final merit {fin['merit']:.4f}"
                     f" >= it_irl {fin['it_irl']:.4f} >= naive_it {fin['naive_it']:.4f}")
    assert ok


def test_criterion_10_success_milestone(goal_run):
    (summary, cfg), _ = goal_run
    rate = summary["baselines"]["merit"]["success_at"]["0.7"]
    ok = rate >= 0.9
    record_criterion(10, "success-rate milestone", ok,
                     f"MERIT success after 70% of the stream {rate:.3f} {'>=' if ok else '<'} 0.9 "
                     f"(mean of {len(cfg['learner']['seeds'])} seeds, exact propagation)")
    assert ok


def test_final_baseline_ordering(goal_run):
    """Final J_true: MERIT at least matches IT-IRL and naive MERIT-IRL (mean of 10 seeds)."""
    (summary, _), _ = goal_run
    fin = {k: v["final_J_true"]["mean"] for k, v in summary["baselines"].items()}
    print("final J_true", {k: round(v, 4) for k, v in fin.items()})
    assert fin["merit"] >= fin["it_irl"]
    assert fin["merit"] >= fin["naive_merit"]


def test_criterion_04_bounded_iterates(goal_run):
    if not any(label.startswith("improvement") for label, _, _ in ITERATE_RUNS):
        test_criterion_03_policy_improvement()
    if not any(label.startswith("regret") for label, _, _ in ITERATE_RUNS):
        test_criterion_06_sublinear_local_regret()
    if not any(label.startswith("goal") for label, _, _ in ITERATE_RUNS):
        _iterate_runs_from_goal(goal_run)
    excess = max(dist - bound for _, dist, bound in ITERATE_RUNS)
    worst = max(ITERATE_RUNS, key=lambda r: r[1] - r[2])
    ok = excess <= 1e-9
    record_criterion(4, "bounded iterates", ok,
                     f"max (|theta_t - prior| - 2C/lam) = {excess:.3f} <= 1e-9 over {len(ITERATE_RUNS)} sqrt_decay runs "
                     f"(tightest: {worst[0]}, {worst[1]:.3f} vs {worst[2]:.3f})")
    assert ok


def _cli(*args, cwd):
    return subprocess.run([sys.executable, "-m", "meritirl.cli", *args], cwd=cwd, capture_output=True, check=False)


def _tree_bytes(root):
    out = {}
    for base, _, files in os.walk(root):
        for f in files:
            p = os.path.join(base, f)
            out[os.path.relpath(p, root)] = open(p, "rb").read()
    return out


def test_criterion_11_determinism(tmp_path):
    conf = tmp_path / "det.toml"
    conf.write_text("[learner]\nT = 40\nseeds = [0, 1, 2]\n[meta]\nN = 10\n")
    runs = []
    for k in range(2):
        o = _cli("oracle-check", "--out", str(tmp_path / f"oracle{k}"), cwd=tmp_path)
        r = _cli("run", "--config", str(conf), "--out", str(tmp_path / f"run{k}"), cwd=tmp_path)
        runs.append((o, r))
    codes = [p.returncode for pair in runs for p in pair]
    same_oracle = _tree_bytes(tmp_path / "oracle0") == _tree_bytes(tmp_path / "oracle1")
    same_run = _tree_bytes(tmp_path / "run0") == _tree_bytes(tmp_path / "run1")
    same_stdout = all(a.stdout == b.stdout for a, b in zip(runs[0], runs[1]))
    n_files = len(_tree_bytes(tmp_path / "run0"))
    ok = codes == [0, 0, 0, 0] and same_oracle and same_run and same_stdout and n_files > 0
    record_criterion(11, "determinism", ok,
                     f"oracle-check and run outputs byte-identical across two invocations "
                     f"({n_files} run files; exit codes {codes})")
    assert ok
