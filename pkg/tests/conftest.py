import numpy as np
import pytest

from meritirl.mdp import FiniteMdp


def self_loop(discount=0.9):
    return FiniteMdp(np.ones((1, 1, 1)), np.ones(1), discount)


def bandit(n_actions=2, discount=0.9):
    return FiniteMdp(np.ones((1, n_actions, 1)), np.ones(1), discount)


def cycle(discount=0.5):
    p = np.zeros((2, 1, 2))
    p[0, 0, 1] = 1.0
    p[1, 0, 0] = 1.0
    return FiniteMdp(p, np.array([1.0, 0.0]), discount)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed after the test session
ACCEPTANCE_LINES = {}


def record_criterion(number, name, passed, detail):
    line = f"criterion {number:2d} {'PASS' if passed else 'FAIL'}  {name}: {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])
