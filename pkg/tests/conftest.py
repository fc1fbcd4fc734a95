"""Shared fixtures: reference maps, seeded random-map builders, and the
acceptance recorder whose PASS/FAIL lines are echoed in the terminal summary."""
from __future__ import annotations

import random
from fractions import Fraction

import pytest

from mdimlab import PwaMap, build_fbeta, identity_map, plan_sequences, tent_map

ACCEPTANCE_LINES: list[str] = []


# === random map builders ======================================================

def random_pwa(rng: random.Random, max_interior: int = 4, denom: int = 24) -> PwaMap:
    """A random continuous piecewise-affine self-map with small denominators."""
    interior = sorted(rng.sample(range(1, denom), rng.randint(0, max_interior)))
    nodes = [(Fraction(0), Fraction(rng.randint(0, denom), denom))]
    nodes += [(Fraction(x, denom), Fraction(rng.randint(0, denom), denom)) for x in interior]
    nodes += [(Fraction(1), Fraction(rng.randint(0, denom), denom))]
    return PwaMap.from_nodes(nodes)


def random_boundary_fixed_pwa(
    rng: random.Random, max_interior: int = 3, denom: int = 16
) -> PwaMap:
    """Like random_pwa but fixing 0 and 1, so it conjugates into subintervals."""
    interior = sorted(rng.sample(range(1, denom), rng.randint(1, max_interior)))
    nodes = [(Fraction(0), Fraction(0))]
    nodes += [(Fraction(x, denom), Fraction(rng.randint(0, denom), denom)) for x in interior]
    nodes += [(Fraction(1), Fraction(1))]
    return PwaMap.from_nodes(nodes)


# === reference objects ========================================================

@pytest.fixture(scope="session")
def tent() -> PwaMap:
    return tent_map()


@pytest.fixture(scope="session")
def identity() -> PwaMap:
    return identity_map()


@pytest.fixture(scope="session")
def half_plan():
    """The two-level ratio-1/2 staircase plan used throughout the suite."""
    return plan_sequences(Fraction(1, 2), 1)


@pytest.fixture(scope="session")
def half_model(half_plan):
    return build_fbeta(half_plan)


# === acceptance reporting =====================================================

@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line per criterion and assert it on the spot."""

    def record(ok: bool, text: str) -> None:
        line = f"[{'PASS' if ok else 'FAIL'}] {text}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
