"""Experiment configuration: TOML files, defaults and environment overrides.

Any key can be overridden with ``MERITIRL_<SECTION>__<KEY>=value``; values
are parsed as JSON when possible (``[1,2]``, ``0.5``, ``true``) and used as
plain strings otherwise.
"""
from __future__ import annotations

import copy
import json
import os
import sys

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

ENV_PREFIX = "MERITIRL_"

DEFAULTS = {
    "environment": {
        "map": "default",  # "default" (10x14 arena) or "grid"
        "width": 5,
        "height": 5,
        "walls": [],
        "starts": [],
        "slip_prob": 0.1,
        "discount": 0.95,
        "goal_reward": 10.0,
        "step_cost": 0.0,
        "feature_kind": "one_hot",
        "rbf_centers": [],
        "rbf_bandwidth": 1.5,
        "goals": "region",  # "region" or a list of [x, y] cells
        "expert_temperature": 1.0,
    },
    "learner": {
        "kinds": ["merit", "it_irl", "naive_merit", "naive_it"],
        "lam": 0.5,
        "schedule": "sqrt_decay",
        "step": 0.01,
        "policy_mode": "one_step",
        "estimator_mode": "sampled",
        "n_rollouts": 10,
        "tail_tol": 1e-8,
        "T": 140,
        "seeds": list(range(10)),
        "milestones": [0.4, 0.6, 0.7, 1.0],
    },
    "meta": {
        "enabled": True,
        "checkpoint": "",
        "n_train_tasks": 20,
        "m_eval": 3,
        "K": 50,
        "N": 50,
        "B": 4,
        "eta_fraction": 0.6,
        "outer_scale": 0.5,
        "mode": "exact",
        "seed": 0,
    },
    "regret": {
        "width": 5,
        "height": 5,
        "discount": 0.99,
        "slip_prob": 0.1,
        "lam": 1.0,
        "schedule": "sqrt_decay",
        "T": [250, 500, 1000, 2000],
        "seeds": list(range(10)),
        "true_theta_scale": 2.0,
    },
    "oracles": {"seed": 0, "instances": 3},
    "output": {"dir": "runs"},
}


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""


def _merge(base: dict, extra: dict, path="") -> dict:
    out = copy.deepcopy(base)
    for key, value in extra.items():
        where = f"{path}{key}"
        if key not in out:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(out[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{where!r} must be a section")
            out[key] = _merge(out[key], value, where + ".")
        else:
            out[key] = value
    return out


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def env_overrides(environ=None) -> dict:
    environ = os.environ if environ is None else environ
    out: dict = {}
    for name, value in sorted(environ.items()):
        if not name.startswith(ENV_PREFIX) or "__" not in name:
            continue
        section, key = name[len(ENV_PREFIX):].lower().split("__", 1)
        out.setdefault(section, {})[key] = _parse_value(value)
    return out


def load_config(path: str | None = None, environ=None) -> dict:
    """Defaults, then the TOML file at ``path``, then environment overrides."""
    cfg = copy.deepcopy(DEFAULTS)
    if path:
        if not os.path.exists(path):
            raise ConfigError(f"config file {path!r} not found")
        with open(path, "rb") as fh:
            try:
                cfg = _merge(cfg, tomllib.load(fh))
            except tomllib.TOMLDecodeError as exc:
                raise ConfigError(f"cannot parse {path!r}: {exc}") from None
    cfg = _merge(cfg, env_overrides(environ))
    validate(cfg)
    return cfg


def validate(cfg: dict) -> None:
    learner = cfg["learner"]
    if not learner["seeds"]:
        raise ConfigError("seeds must be nonempty")
    if int(learner["T"]) < 1:
        raise ConfigError("learner.T must be >= 1")
    if not float(learner["lam"]) > 0:
        raise ConfigError("learner.lam must be > 0")
    if cfg["environment"]["map"] not in ("default", "grid"):
        raise ConfigError("environment.map must be 'default' or 'grid'")
    if not cfg["regret"]["seeds"]:
        raise ConfigError("regret.seeds must be nonempty")
    ckpt = cfg["meta"]["checkpoint"]
    if ckpt and not os.path.exists(ckpt):
        raise ConfigError(f"meta checkpoint {ckpt!r} not found")


def config_digest(cfg: dict) -> str:
    import hashlib

    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()[:16]
