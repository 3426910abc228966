"""Config-driven experiments: meta-training, online runs, regret sweeps, heatmaps.

All randomness derives from the configured seeds through
``numpy.random.SeedSequence`` so every output file is a deterministic
function of (config, seeds).
"""
from __future__ import annotations

import json
import math
import os

import numpy as np

from . import envs
from .config import ConfigError, config_digest
from .meta import MetaConfig, load_checkpoint, meta_train, save_checkpoint
from .online import (
    BASELINES,
    MeritConfig,
    StepSchedule,
    comparator_losses,
    comparator_theta,
    run_online,
    window_regret,
)

SUMMARY_SCHEMA = "meritirl.summary/1"
REGRET_SCHEMA = "meritirl.regret/1"
HEATMAP_SCHEMA = "meritirl.heatmap/1"


def _rng(*key):
    return np.random.default_rng(np.random.SeedSequence(list(key)))


def _cells(raw):
    return tuple(tuple(int(v) for v in c) for c in raw)


def build_spec(env: dict) -> envs.GridworldSpec:
    common = dict(
        slip_prob=float(env["slip_prob"]),
        discount=float(env["discount"]),
        goal_reward=float(env["goal_reward"]),
        step_cost=float(env["step_cost"]),
        feature_kind=env["feature_kind"],
        rbf_centers=tuple(tuple(c) for c in env["rbf_centers"]),
        rbf_bandwidth=float(env["rbf_bandwidth"]),
    )
    if env["map"] == "default":
        return envs.default_map(**common)
    return envs.GridworldSpec(
        int(env["width"]), int(env["height"]), goal=(int(env["width"]) - 1, int(env["height"]) - 1),
        walls=_cells(env["walls"]), starts=_cells(env["starts"]), **common,
    )


def build_distribution(cfg: dict) -> envs.TaskDistribution:
    env = cfg["environment"]
    spec = build_spec(env)
    goals = envs.default_goal_region(spec) if env["goals"] == "region" else list(_cells(env["goals"]))
    return envs.TaskDistribution(
        spec, tuple(goals), horizon=int(cfg["learner"]["T"]), expert_temperature=float(env["expert_temperature"])
    )


def meta_config(cfg: dict, model, discount: float) -> MetaConfig:
    meta = cfg["meta"]
    lam = float(cfg["learner"]["lam"])
    return MetaConfig.for_model(
        model, discount, lam, eta=float(meta["eta_fraction"]) * lam,
        K=int(meta["K"]), N=int(meta["N"]), B=int(meta["B"]), outer_scale=float(meta["outer_scale"]),
    )


def train_prior(cfg: dict, dist=None):
    """Meta-train the prior on ``n_train_tasks`` tasks; returns ``(theta_bar, result, meta_config)``."""
    dist = dist or build_distribution(cfg)
    meta = cfg["meta"]
    task_rng = _rng(int(meta["seed"]), 0)
    tasks = [envs.sample_meta_task(dist, int(meta["m_eval"]), task_rng) for _ in range(int(meta["n_train_tasks"]))]
    model = tasks[0].model
    mcfg = meta_config(cfg, model, dist.base.discount)
    result = meta_train(
        model, lambda r: tasks[int(r.integers(len(tasks)))], mcfg, _rng(int(meta["seed"]), 1), mode=meta["mode"]
    )
    return result.theta_bar, result, mcfg


def resolve_prior(cfg: dict, dist, model) -> np.ndarray:
    meta = cfg["meta"]
    if meta["checkpoint"]:
        theta, _ = load_checkpoint(meta["checkpoint"], model.dim)
        return theta
    if meta["enabled"]:
        return train_prior(cfg, dist)[0]
    return np.zeros(model.dim)


def merit_config(cfg: dict, prior, discount: float, mode: str | None = None) -> MeritConfig:
    learner = cfg["learner"]
    lam = float(learner["lam"])
    sched = StepSchedule(learner["schedule"], discount, lam, float(learner["step"]))
    return MeritConfig(
        lam, prior, sched,
        tail_tol=float(learner["tail_tol"]),
        policy_mode=learner["policy_mode"],
        estimator_mode=mode or learner["estimator_mode"],
        n_rollouts=int(learner["n_rollouts"]),
    )


def run_seed(cfg: dict, dist, prior, seed: int, kind: str, mode: str | None = None):
    """One held-out task for ``seed`` and one online run of ``kind`` on its expert stream.

    Returns ``(result, task, milestone_success)``.
    """
    if kind not in BASELINES:
        raise ConfigError(f"unknown baseline {kind!r}")
    T = int(cfg["learner"]["T"])
    task = envs.sample_meta_task(dist, 1, _rng(seed, 1))
    model = task.model
    mcfg = merit_config(cfg, prior, task.mdp.discount, mode)
    stream = envs.expert_stream(task.mdp, task.expert, T, _rng(seed, 2))
    full = None
    if kind == "hindsight":
        full = envs.rollout(task.mdp, task.expert, None, T, _rng(seed, 2))
    marks = {max(1, math.ceil(f * T)) - 1: f for f in cfg["learner"]["milestones"]}
    success = {}

    def probe(t, state):
        if t in marks:
            success[marks[t]] = envs.success_probability(task.mdp, state.policy, task.goal_state, T)

    result = run_online(
        model, task.mdp, stream, T, kind, mcfg, _rng(seed, 3, BASELINES.index(kind)),
        true_reward=task.true_reward, full_trajectory=full, record_regret=True, on_step=probe,
    )
    return result, task, success


def _write(path, text):
    with open(path, "w") as fh:
        fh.write(text)


def _dump_json(path, data):
    _write(path, json.dumps(data, indent=1, sort_keys=True) + "\n")


def run_experiment(cfg: dict, out_dir: str, kinds=None, seeds=None, mode=None) -> dict:
    """Meta-train (or load) the prior, run every baseline on every seed, write CSVs and a summary."""
    kinds = list(kinds or cfg["learner"]["kinds"])
    seeds = list(cfg["learner"]["seeds"] if seeds is None else seeds)
    if not seeds:
        raise ConfigError("seeds must be nonempty")
    os.makedirs(out_dir, exist_ok=True)
    dist = build_distribution(cfg)
    model = dist.world(dist.goals[0]).model
    prior = resolve_prior(cfg, dist, model)
    _write(os.path.join(out_dir, "prior.json"), json.dumps([float(x) for x in prior]) + "\n")
    T = int(cfg["learner"]["T"])
    summary = {"schema": SUMMARY_SCHEMA, "config_hash": config_digest(cfg), "T": T, "baselines": {}}
    for kind in kinds:
        finals, curves, succ = [], [], []
        for seed in seeds:
            res, task, success = run_seed(cfg, dist, prior, int(seed), kind, mode)
            stem = os.path.join(out_dir, f"{kind}_seed{seed}")
            _write(stem + ".csv", res.to_csv())
            _write(stem + "_theta.json", res.theta_json() + "\n")
            finals.append(float(res.j_true[-1]))
            curves.append(res.j_true)
            succ.append(success)
        curves = np.array(curves)
        entry = {
            "final_J_true": {
                "mean": float(np.mean(finals)),
                "std": float(np.std(finals)),
                "per_seed": finals,
            },
            "J_true_at": {},
            "success_at": {},
        }
        for f in cfg["learner"]["milestones"]:
            row = max(1, math.ceil(f * T)) - 1
            entry["J_true_at"][str(f)] = float(curves[:, row].mean())
            entry["success_at"][str(f)] = float(np.mean([s[f] for s in succ]))
        summary["baselines"][kind] = entry
    _dump_json(os.path.join(out_dir, "summary.json"), summary)
    return summary


def meta_train_command(cfg: dict, out_dir: str) -> dict:
    os.makedirs(out_dir, exist_ok=True)
    theta, result, mcfg = train_prior(cfg)
    save_checkpoint(os.path.join(out_dir, "meta_prior.json"), theta, mcfg)
    lines = ["# schema: meritirl.meta_trace/1", "n,outer_loss"]
    lines += [f"{n},{v!r}" for n, v in enumerate(result.outer_losses.tolist())]
    _write(os.path.join(out_dir, "meta_trace.csv"), "\n".join(lines) + "\n")
    report = {
        "smoothness": mcfg.smoothness,
        "lambda_min": mcfg.lambda_min,
        "admissible": mcfg.admissible,
        "eta": mcfg.eta,
    }
    _dump_json(os.path.join(out_dir, "meta_report.json"), report)
    return report


# ---------------------------------------------------------------------------
# regret sweep


def regret_world(reg: dict):
    """5x5-style gridworld with 3x3 RBF features and an expert whose reward peaks at the far corner."""
    w, h = int(reg["width"]), int(reg["height"])
    xs = sorted({0, (w - 1) // 2, w - 1})
    ys = sorted({0, (h - 1) // 2, h - 1})
    spec = envs.GridworldSpec(
        w, h, goal=(w - 1, h - 1), slip_prob=float(reg["slip_prob"]), discount=float(reg["discount"]),
        feature_kind="goal_distance_rbf", rbf_centers=tuple((x, y) for x in xs for y in ys), rbf_bandwidth=1.5,
    )
    world = envs.build_gridworld(spec)
    theta_true = np.zeros(world.model.dim)
    theta_true[-1] = float(reg["true_theta_scale"])
    true_reward = world.model.reward_table(theta_true)
    expert = envs.expert_policy(world.mdp, true_reward)
    return world, true_reward, expert


def regret_sweep(cfg: dict, seeds=None, schedule=None, mode=None) -> dict:
    """Cumulative local regret ``R(T)`` at each configured ``T`` plus loss-regret windows.

    ``ratios[T] = R(2T) / R(T)`` for each ``T`` whose double is also configured.
    Loss regret is measured against the minimiser of the expert-occupancy
    weighted objective; ``windows`` sum ``L_t(theta_t) - L_t(theta*)`` over
    ``[T_k, T_{k+1})`` directly.
    """
    reg = cfg["regret"]
    seeds = list(reg["seeds"] if seeds is None else seeds)
    if not seeds:
        raise ConfigError("seeds must be nonempty")
    ts = sorted(int(t) for t in reg["T"])
    horizon = ts[-1]
    world, true_reward, expert = regret_world(reg)
    lam = float(reg["lam"])
    kind = schedule or reg["schedule"]
    mcfg = MeritConfig(
        lam, np.zeros(world.model.dim), StepSchedule(kind, world.mdp.discount, lam),
        estimator_mode=mode or "sampled",
    )
    theta_star = comparator_theta(world.model, world.mdp, expert, mcfg)
    per_seed = []
    curves = {}
    for seed in seeds:
        stream = envs.expert_stream(world.mdp, expert, horizon, _rng(seed, 2))
        res = run_online(world.model, world.mdp, stream, horizon, "merit", mcfg, _rng(seed, 3), true_reward=true_reward)
        cum = res.regret.cumulative
        comp = comparator_losses(world.model, world.mdp, theta_star, res.state.prefix, mcfg)
        alphas = np.array([r.alpha for r in res.state.history])
        per_seed.append({
            "seed": int(seed),
            "R": {str(t): float(cum[t - 1]) for t in ts},
            "ratios": {str(t): float(cum[2 * t - 1] / cum[t - 1]) for t in ts if 2 * t in ts},
            "windows": {f"{a}-{b}": window_regret(res.regret.losses, comp, a, b) for a, b in zip(ts, ts[1:])},
            "max_theta_dist": float(np.max(np.linalg.norm(res.thetas - mcfg.meta_prior, axis=1))),
            "step_condition": bool(np.all(alphas <= (1.0 - world.mdp.discount) / lam + 1e-15)),
        })
        curves[int(seed)] = (res.regret.local, cum, res.regret.losses, comp)
    mean_ratio = {
        k: float(np.mean([p["ratios"][k] for p in per_seed])) for k in per_seed[0]["ratios"]
    }
    mean_window = {
        k: float(np.mean([p["windows"][k] for p in per_seed])) for k in per_seed[0]["windows"]
    }
    return {
        "schema": REGRET_SCHEMA,
        "schedule": kind,
        "theta_star": [float(x) for x in theta_star],
        "bound": 2.0 * world.model.grad_norm_bound / lam,
        "per_seed": per_seed,
        "mean_ratios": mean_ratio,
        "mean_windows": mean_window,
        "_curves": curves,
    }


def write_regret(report: dict, out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    curves = report["_curves"]
    for seed, (local, cum, losses, comp) in curves.items():
        lines = [f"# schema: {REGRET_SCHEMA}", "t,local_regret,cumulative,loss,comparator_loss"]
        lines += [f"{t},{a!r},{b!r},{c!r},{d!r}" for t, (a, b, c, d) in
                  enumerate(zip(local.tolist(), cum.tolist(), losses.tolist(), comp.tolist()))]
        _write(os.path.join(out_dir, f"regret_{report['schedule']}_seed{seed}.csv"), "\n".join(lines) + "\n")
    public = {k: v for k, v in report.items() if not k.startswith("_")}
    _dump_json(os.path.join(out_dir, f"regret_{report['schedule']}.json"), public)


# ---------------------------------------------------------------------------
# heatmaps


def heatmap_values(model, grid_shape, theta) -> np.ndarray:
    """Per-cell max-over-actions reward normalised to [0, 1]; rows run north to south.

    A constant reward maps to 0.5 everywhere.
    """
    if grid_shape is None:
        raise ConfigError("heatmap needs a grid MDP")
    width, height = grid_shape
    cell = model.reward_table(theta).max(axis=1)
    if cell.size != width * height:
        raise ConfigError("reward size does not match the grid")
    lo, hi = cell.min(), cell.max()
    norm = np.full_like(cell, 0.5) if hi - lo <= 0 else (cell - lo) / (hi - lo)
    return norm.reshape(height, width)[::-1]


def export_heatmap(model, grid_shape, theta, path_prefix: str) -> tuple[str, str]:
    """Write ``<prefix>.csv`` and an 8-bit ``<prefix>.pgm`` (round half up)."""
    grid = heatmap_values(model, grid_shape, theta)
    height, width = grid.shape
    csv_path, pgm_path = path_prefix + ".csv", path_prefix + ".pgm"
    lines = [f"# schema: {HEATMAP_SCHEMA}"] + [",".join(repr(float(v)) for v in row) for row in grid]
    _write(csv_path, "\n".join(lines) + "\n")
    pixels = np.floor(grid * 255.0 + 0.5).astype(np.uint8)
    with open(pgm_path, "wb") as fh:
        fh.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        fh.write(pixels.tobytes())
    return csv_path, pgm_path
