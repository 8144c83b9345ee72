import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

from salvo_consensus.graph import build_graph, cycle_graph, star_graph  # noqa: E402
from salvo_consensus.scenario import load_scenario, shipped_scenario  # noqa: E402

settings.register_profile(
    "repo",
    derandomize=True,
    deadline=None,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("repo")

# weights of the heterogeneous cycle and star used throughout the examples
CYCLE_FORWARD = [7, 3, 3, 8, 0.1]      # w12 w23 w34 w45 w51
CYCLE_BACKWARD = [0.3, 1.25, 5, 0.1, 5]  # w21 w32 w43 w54 w15
STAR_HUB = [0.7, 1.4, 1, 0.23]          # w12 w13 w14 w15
STAR_SPOKE = [2.4, 2.85, 4, 1.35]       # w21 w31 w41 w51

# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def table_cycle():
    return cycle_graph(CYCLE_FORWARD, CYCLE_BACKWARD)


@pytest.fixture
def table_star():
    return star_graph(STAR_HUB, STAR_SPOKE)


@pytest.fixture(scope="session")
def cycle_scenario():
    return load_scenario(shipped_scenario("cycle_table1"))


@pytest.fixture(scope="session")
def star_scenario():
    return load_scenario(shipped_scenario("star_table4"))


@pytest.fixture(scope="session")
def cycle_trace(cycle_scenario):
    from salvo_consensus.engagement import simulate_salvo

    return simulate_salvo(cycle_scenario)


def random_connected_rows(rng: np.random.Generator, n: int, extra: int, low=0.2, high=5.0):
    """Random spanning tree plus ``extra`` chords, positive weights."""
    order = rng.permutation(n) + 1
    pairs = set()
    for k in range(1, n):
        a, b = int(order[k]), int(order[rng.integers(0, k)])
        pairs.add((min(a, b), max(a, b)))
    attempts = 0
    while len(pairs) < n - 1 + extra and attempts < 100:
        a, b = sorted(int(x) for x in rng.choice(n, 2, replace=False) + 1)
        pairs.add((a, b))
        attempts += 1
    return [(a, b, float(rng.uniform(low, high)), float(rng.uniform(low, high))) for a, b in sorted(pairs)]


def random_connected_graph(rng, n, extra):
    return build_graph(n, random_connected_rows(rng, n, extra))
