import math

import pytest
from hypothesis import HealthCheck, settings

import numpy as np

from decompound.model import ACDensity, LevyTriple

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE_LINES = []


@pytest.fixture
def poisson_triple():
    """nu = delta_1, lambda = 1, no drift."""
    return LevyTriple(0.0, 1.0, 1.0, {1: 1.0})


@pytest.fixture
def symmetric_triple():
    """nu = 0.5 delta_-1 + 0.5 delta_1: exact cancellations."""
    return LevyTriple(0.0, 1.0, 1.0, {-1: 0.5, 1: 0.5})


@pytest.fixture
def skewed_triple():
    """nu = 0.4 delta_-1 + 0.6 delta_1."""
    return LevyTriple(0.0, 1.0, 1.0, {-1: 0.4, 1: 0.6})


def make_mixed_triple():
    """0.5 delta_1 plus mass 0.5 spread uniformly on [-2, -0.5], drift 0.3."""
    ac = ACDensity.from_function(lambda x: np.full_like(x, 0.5 / 1.5), -2.0, -0.5, 1 / 32)
    return LevyTriple(0.3, 0.5 + ac.mass, 1.0, {1: 0.5}, ac)


@pytest.fixture
def mixed_triple():
    return make_mixed_triple()


def all_fixtures():
    return {
        "poisson": LevyTriple(0.0, 1.0, 1.0, {1: 1.0}),
        "symmetric": LevyTriple(0.0, 1.0, 1.0, {-1: 0.5, 1: 0.5}),
        "skewed": LevyTriple(0.0, 1.0, 1.0, {-1: 0.4, 1: 0.6}),
        "mixed": make_mixed_triple(),
    }


def record_acceptance(number, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)


def rel(a, b):
    return abs(a - b) / abs(b) if b != 0 else abs(a - b)


E = math.e
