"""Command-line entry point.

Exit codes: 0 success, 1 failed oracle checks, 2 configuration error,
3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import experiment
from .config import ConfigError, load_config
from .mdp import MdpError
from .meta import AdmissibilityError, load_checkpoint
from .online import BASELINES
from .oracles import oracle_check_suite
from .rewards import params_from_json
from .soft import SoftSolveError


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="meritirl", description="In-trajectory IRL experiments on finite MDPs.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="TOML config file (defaults are used for missing keys)")
        sp.add_argument("--seed", type=int, action="append", help="override the seed list (repeatable)")
        sp.add_argument("--out", default=None, help="output directory")
        return sp

    common(sub.add_parser("meta-train", help="learn the reward prior and write a checkpoint"))
    run = common(sub.add_parser("run", help="online runs for each baseline and seed"))
    run.add_argument("--baseline", action="append", choices=BASELINES)
    run.add_argument("--mode", choices=("sampled", "exact"))
    common(sub.add_parser("oracle-check", help="numerical self-checks; nonzero exit on failure"))
    sweep = common(sub.add_parser("regret-sweep", help="local regret growth over several horizons"))
    sweep.add_argument("--mode", choices=("sampled", "exact"))
    sweep.add_argument("--schedule", choices=("sqrt_decay", "linear_reward_decay", "constant"))
    heat = common(sub.add_parser("export-heatmap", help="write a normalised reward heatmap (CSV + PGM)"))
    heat.add_argument("--theta", required=True, help="JSON parameter vector or meta-prior checkpoint")
    return p


def _load_theta(path):
    with open(path) as fh:
        text = fh.read()
    data = json.loads(text)
    if isinstance(data, dict):
        return load_checkpoint(path)[0]
    return params_from_json(text)


def _main(args) -> int:
    cfg = load_config(args.config)
    if args.seed:
        cfg["learner"]["seeds"] = list(args.seed)
        cfg["regret"]["seeds"] = list(args.seed)
    out = args.out or cfg["output"]["dir"]

    if args.command == "meta-train":
        report = experiment.meta_train_command(cfg, out)
        print(json.dumps(report, sort_keys=True))
        return 0
    if args.command == "run":
        summary = experiment.run_experiment(cfg, out, kinds=args.baseline, mode=args.mode)
        for kind, entry in summary["baselines"].items():
            fin = entry["final_J_true"]
            print(f"{kind}: final J_true {fin['mean']:.4f} +- {fin['std']:.4f}")
        return 0
    if args.command == "oracle-check":
        report = oracle_check_suite(cfg)
        os.makedirs(out, exist_ok=True)
        with open(os.path.join(out, "oracles.json"), "w") as fh:
            fh.write(json.dumps(report, indent=1, sort_keys=True) + "\n")
        for e in report["oracles"]:
            print(f"{'PASS' if e['passed'] else 'FAIL'} {e['name']} {e['discrepancy']:.3e} <= {e['tolerance']:.1e}")
        return 0 if report["passed"] else 1
    if args.command == "regret-sweep":
        report = experiment.regret_sweep(cfg, schedule=args.schedule, mode=args.mode)
        experiment.write_regret(report, out)
        print(json.dumps({"mean_ratios": report["mean_ratios"], "mean_windows": report["mean_windows"]}))
        return 0
    if args.command == "export-heatmap":
        dist = experiment.build_distribution(cfg)
        world = dist.world(dist.goals[0])
        theta = _load_theta(args.theta)
        os.makedirs(out, exist_ok=True)
        paths = experiment.export_heatmap(world.model, world.mdp.grid_shape, theta, os.path.join(out, "heatmap"))
        print("\n".join(paths))
        return 0
    raise ConfigError(f"unknown command {args.command!r}")


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return _main(args)
    except (ConfigError, MdpError, AdmissibilityError, KeyError, OSError) as exc:
        print(f"meritirl {args.command}: configuration error in {type(exc).__module__}: {exc}", file=sys.stderr)
        return 2
    except (SoftSolveError, FloatingPointError, np.linalg.LinAlgError, RuntimeError) as exc:
        print(f"meritirl {args.command}: numerical error in {type(exc).__module__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
