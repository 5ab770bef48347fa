"""Offline optima used as benchmarks for the online algorithms."""

from __future__ import annotations

from itertools import permutations

import numpy as np
from scipy.optimize import linear_sum_assignment

from .match_mono import server_counts
from .mw_search import SearchInstance
from .tree_metric import WeightedTree


def opt_search_cost(instance: SearchInstance) -> float:
    # drive straight to the spot that is never decommissioned
    return instance.tree.distance(instance.start, instance.survivor)


def _server_list(tree: WeightedTree, servers) -> list[int]:
    counts = server_counts(tree.n, servers)
    return [int(v) for v in np.repeat(np.arange(tree.n), counts)]


def opt_matching_cost(tree: WeightedTree, servers, requests) -> float:
    """Minimum total distance over injective request-to-server assignments."""
    slots = _server_list(tree, servers)
    requests = [int(r) for r in requests]
    if len(requests) > len(slots):
        raise ValueError("more requests than servers")
    if not requests:
        return 0.0
    cost = tree.distance_matrix[np.ix_(requests, slots)]
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].sum())


def brute_force_matching_cost(tree: WeightedTree, servers, requests) -> float:
    """Exhaustive version of ``opt_matching_cost`` for tiny instances."""
    slots = _server_list(tree, servers)
    requests = [int(r) for r in requests]
    if len(requests) > len(slots):
        raise ValueError("more requests than servers")
    D = tree.distance_matrix
    best = np.inf
    for perm in permutations(range(len(slots)), len(requests)):
        best = min(best, sum(D[r, slots[j]] for r, j in zip(requests, perm)))
    return float(best) if requests else 0.0
