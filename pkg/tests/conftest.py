import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from parkmatch.tree_metric import WeightedTree

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@st.composite
def trees(draw, min_n=1, max_n=12, integer_weights=False):
    n = draw(st.integers(min_n, max_n))
    parents = [-1] + [draw(st.integers(0, i - 1)) for i in range(1, n)]
    if integer_weights:
        w = [0.0] + [float(draw(st.integers(1, 9))) for _ in range(1, n)]
    else:
        w = [0.0] + [draw(st.floats(0.25, 20.0, allow_nan=False)) for _ in range(1, n)]
    # relabel so ids are not always ordered by depth
    perm = draw(st.permutations(range(n)))
    edges = [(perm[parents[v]], perm[v], w[v]) for v in range(1, n)]
    return WeightedTree(n, edges, root=perm[0])


def spider(legs, weights=None):
    """Root 0 with one path per entry of ``legs``; every non-root vertex is a spot."""
    edges, spots, nxt = [], [], 1
    weights = iter(weights) if weights is not None else None
    for length in legs:
        prev = 0
        for _ in range(length):
            w = 1.0 if weights is None else float(next(weights))
            edges.append((prev, nxt, w))
            spots.append(nxt)
            prev, nxt = nxt, nxt + 1
    return WeightedTree(nxt, edges), spots


@pytest.fixture
def path3():
    # a=0 - b=1 (1), b - c=2 (2)
    return WeightedTree(3, [(0, 1, 1.0), (1, 2, 2.0)], root=0)


@pytest.fixture
def star3():
    return WeightedTree(4, [(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0)], root=0)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
