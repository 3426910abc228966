import os
import subprocess
import sys

import numpy as np
import pytest

from meritirl import envs, kernels

compiled_available = True
try:
    kernels.get_backend("compiled")
except ImportError:
    compiled_available = False

needs_compiled = pytest.mark.skipif(not compiled_available, reason="compiled extension not built")


def _problem(rng):
    mdp = envs.random_mdp(7, 3, 0.9, rng)
    pi = envs.random_policy(7, 3, rng)
    return mdp, np.ascontiguousarray(np.cumsum(pi, axis=1))


@needs_compiled
@pytest.mark.parametrize("first_action", [-1, 2])
def test_rollouts_identical(rng, first_action):
    mdp, cum_pi = _problem(rng)
    u = rng.random((50, 40, 2))
    args = (mdp.cum_initial, mdp.cum_transition, cum_pi, u, first_action)
    a = kernels.get_backend("python").sample_rollouts(*args)
    b = kernels.get_backend("compiled").sample_rollouts(*args)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


@needs_compiled
def test_counts_identical(rng):
    states = rng.integers(0, 7, (20, 30))
    actions = rng.integers(0, 3, (20, 30))
    powers = 0.9 ** np.arange(30.0)
    a = kernels.get_backend("python").discounted_counts(states, actions, 7, 3, powers)
    b = kernels.get_backend("compiled").discounted_counts(states, actions, 7, 3, powers)
    assert np.array_equal(a, b)


@needs_compiled
def test_value_iteration_agrees(rng):
    mdp, _ = _problem(rng)
    r = rng.standard_normal((7, 3))
    args = (np.ascontiguousarray(mdp.transition), r, 0.9, np.zeros(7), 1e-11, 10_000)
    va, wa, ia, ra = kernels.get_backend("python").soft_value_iteration(*args)
    vb, wb, ib, rb = kernels.get_backend("compiled").soft_value_iteration(*args)
    assert abs(ia - ib) <= 1
    assert np.allclose(wa, wb, atol=1e-9)


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.get_backend("gpu")


def test_pure_python_switch():
    env = dict(os.environ, MERITIRL_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from meritirl import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
