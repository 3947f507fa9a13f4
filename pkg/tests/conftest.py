import math

import numpy as np
import pytest

from echosculpt.model import PhaseTarget, SpinSystem, pairs


def random_system(q, rng, offsets_hz=(1.0, 100.0), couplings_hz=(1.0, 100.0)):
    lo, hi = offsets_hz
    offsets = np.exp(rng.uniform(math.log(lo), math.log(hi), q))
    prs = pairs(q)
    lo, hi = couplings_hz
    coup = np.exp(rng.uniform(math.log(lo), math.log(hi), len(prs)))
    return SpinSystem.from_hz(offsets, dict(zip(prs, coup)))


def random_coupling_target(q, rng, zero_fraction=0.0):
    prs = pairs(q)
    phases = rng.uniform(-math.pi, math.pi, len(prs))
    phases[rng.random(len(prs)) < zero_fraction] = 0.0
    return PhaseTarget.couplings_only(q, dict(zip(prs, phases)))


@pytest.fixture
def rng():
    return np.random.default_rng(20201)


@pytest.fixture
def three_spin():
    """Couplings 10, 20, 40 Hz with equal pi targets and refocused offsets."""
    system = SpinSystem.from_hz([1200.0, -800.0, 450.0], {(0, 1): 10.0, (0, 2): 20.0, (1, 2): 40.0})
    target = PhaseTarget.couplings_only(3, {(0, 1): math.pi, (0, 2): math.pi, (1, 2): math.pi})
    return system, target


@pytest.fixture
def chain4():
    """Four-spin chain: kHz offsets, strong neighbour and weak long-range couplings."""
    system = SpinSystem.from_hz(
        [-1705.0, 3468.0, 6912.0, -9143.0],
        {(0, 1): 72.4, (1, 2): 69.7, (2, 3): 41.6, (0, 2): 1.4, (0, 3): 7.0, (1, 3): 1.6},
    )
    target = PhaseTarget.couplings_only(4, {(0, 1): math.pi, (1, 2): math.pi, (2, 3): math.pi})
    return system, target


# reduced sign matrix of a four-spin chain schedule and its delays (ms)
CHAIN9_SIGNS = np.array(
    [
        [+1, +1, -1, -1, -1, -1, +1, +1, +1],
        [+1, +1, +1, -1, -1, -1, -1, +1, +1],
        [+1, +1, +1, +1, -1, -1, -1, -1, -1],
        [+1, -1, -1, +1, +1, -1, -1, -1, +1],
    ]
)
CHAIN9_TIMES_MS = np.array([3.5, 1.3, 1.8, 3.0, 1.8, 3.0, 1.8, 1.7, 1.3])


# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
