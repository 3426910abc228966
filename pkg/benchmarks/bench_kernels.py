"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Prints one line per kernel with the best-of-``repeat`` wall time for each
backend and the speedup. Outputs are also compared for equality.
"""
import argparse
import timeit

import numpy as np

from meritirl import kernels
from meritirl.envs import build_gridworld, default_map, random_policy


def workloads(rng):
    world = build_gridworld(default_map(discount=0.95))
    mdp = world.mdp
    pi = random_policy(mdp.n_states, mdp.n_actions, rng)
    cum_pi = np.ascontiguousarray(np.cumsum(pi, axis=1))
    uniforms = rng.random((64, 400, 2))
    states, actions = kernels.get_backend("python").sample_rollouts(
        mdp.cum_initial, mdp.cum_transition, cum_pi, uniforms, -1
    )
    powers = mdp.discount ** np.arange(400, dtype=np.float64)
    reward = rng.standard_normal((mdp.n_states, mdp.n_actions))
    return {
        "sample_rollouts (64 x 400)": ("sample_rollouts", (mdp.cum_initial, mdp.cum_transition, cum_pi, uniforms, -1)),
        "discounted_counts (64 x 400)": (
            "discounted_counts", (states, actions, mdp.n_states, mdp.n_actions, powers)
        ),
        "soft_value_iteration (140 states)": (
            "soft_value_iteration",
            (np.ascontiguousarray(mdp.transition), reward, mdp.discount, np.zeros(mdp.n_states), 1e-10, 100_000),
        ),
    }


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    if kernels.BACKEND != "compiled":
        print("compiled extension not available; only the python backend can be timed")
    rng = np.random.default_rng(0)
    backends = ["python"] + (["compiled"] if kernels.BACKEND == "compiled" else [])
    for label, (name, call_args) in workloads(rng).items():
        times = {}
        outputs = {}
        for b in backends:
            fn = getattr(kernels.get_backend(b), name)
            outputs[b] = fn(*call_args)
            times[b] = min(timeit.repeat(lambda: fn(*call_args), number=1, repeat=args.repeat))
        line = f"{label:36s} python {times['python'] * 1e3:9.2f} ms"
        if "compiled" in times:
            same = all(np.array_equal(np.asarray(x), np.asarray(y)) or np.allclose(x, y, rtol=0, atol=1e-12)
                       for x, y in zip(outputs["python"], outputs["compiled"]))
            line += f"  compiled {times['compiled'] * 1e3:9.2f} ms  speedup {times['python'] / times['compiled']:6.1f}x"
            line += "  outputs agree" if same else "  OUTPUTS DIFFER"
        print(line)


if __name__ == "__main__":
    main()
