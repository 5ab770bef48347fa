"""Random trees and instances for tests and experiments."""

from __future__ import annotations

import math

import networkx as nx
import numpy as np

from .mw_search import SearchInstance
from .tree_metric import WeightedTree

WEIGHT_LAWS = ("unit", "uniform", "loguniform")


def random_shape(n: int, rng: np.random.Generator) -> list[tuple[int, int]]:
    """Edges of a uniformly random labelled tree on ``n`` vertices (Pruefer)."""
    if n == 1:
        return []
    if n == 2:
        return [(0, 1)]
    seq = [int(x) for x in rng.integers(0, n, size=n - 2)]
    g = nx.from_prufer_sequence(seq)
    return sorted((min(u, v), max(u, v)) for u, v in g.edges())


def _loguniform_weights(shape, m: int, Delta_target: float, rng) -> np.ndarray:
    """Weights ``Delta_target ** (a * (U - min U))`` with ``a`` found by
    bisection so the root eccentricity lands on the target. Every weight is
    at most the eccentricity, so they stay within ``[1, Delta_target]``."""
    u = rng.random(m)
    u -= u.min()
    # paths[v, e] = 1 when edge e lies on the root path of v
    unit = WeightedTree(m + 1, [(x, y, 1.0) for x, y in shape])
    index = {frozenset(e): i for i, e in enumerate(shape)}
    paths = np.zeros((m + 1, m))
    for v in range(1, m + 1):
        for a, b in unit.path_edges(v, unit.root):
            paths[v, index[frozenset((a, b))]] = 1.0

    def ecc(a):
        return float((paths @ Delta_target ** (a * u)).max())

    if Delta_target <= 1 or ecc(0.0) >= Delta_target:
        return np.ones(m)
    lo, hi = 0.0, 1.0
    while ecc(hi) < Delta_target:
        if u.max() == 0.0 or hi > 1e6:
            return Delta_target ** (hi * u)
        hi *= 2.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if ecc(mid) > Delta_target:
            hi = mid
        else:
            lo = mid
    return Delta_target ** (lo * u)


def gen_random_tree(n: int, rng: np.random.Generator, weight_law: str = "loguniform",
                    Delta_target: float = 64.0) -> WeightedTree:
    """Random labelled tree rooted at 0, normalised so the closest pair is 1 apart.

    ``loguniform`` draws weights in ``[1, Delta_target]`` whose spread is
    tuned so the root eccentricity comes out at ``Delta_target`` (when the
    shape allows it).
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if weight_law not in WEIGHT_LAWS:
        raise ValueError(f"unknown weight law {weight_law!r}")
    shape = random_shape(n, rng)
    m = len(shape)
    if m == 0:
        return WeightedTree(1, [], 0)
    if weight_law == "unit":
        w = np.ones(m)
    elif weight_law == "uniform":
        w = rng.uniform(1.0, max(Delta_target, 1.0), size=m)
    else:
        w = _loguniform_weights(shape, m, Delta_target, rng)
    tree = WeightedTree(n, [(a, b, float(x)) for (a, b), x in zip(shape, w)], root=0)
    return tree.normalize()


def gen_search_instance(tree: WeightedTree, rng: np.random.Generator,
                        n_spots: int | None = None, distinct: bool = False) -> SearchInstance:
    """Random spots, start and kill order; the survivor is the last spot left.

    With ``distinct`` the survivor differs from the start whenever possible,
    so the offline optimum is positive.
    """
    n = tree.n
    if n_spots is None:
        n_spots = int(rng.integers(1, n + 1))
    n_spots = max(1, min(n_spots, n))
    spots = [int(x) for x in rng.choice(n, size=n_spots, replace=False)]
    start = int(rng.integers(n))
    order = [int(x) for x in rng.permutation(spots)]
    if distinct and n_spots > 1 and order[-1] == start:
        j = int(rng.integers(n_spots - 1))
        order[j], order[-1] = order[-1], order[j]
    if distinct and n_spots == 1 and order[0] == start and n > 1:
        start = int((start + 1 + rng.integers(n - 1)) % n)
    return SearchInstance(tree, spots, start, order[:-1])


def gen_match_instance(tree: WeightedTree, k: int, m: int,
                       rng: np.random.Generator) -> tuple[list[int], list[int]]:
    """``k`` servers and ``m <= k`` requests at uniformly random vertices."""
    if m > k:
        raise ValueError("more requests than servers")
    servers = sorted(int(x) for x in rng.integers(0, tree.n, size=k))
    requests = [int(x) for x in rng.integers(0, tree.n, size=m)]
    return servers, requests


def all_tree_shapes(n: int) -> list[WeightedTree]:
    """One unit-weight tree per isomorphism class on ``n`` vertices."""
    if n == 1:
        return [WeightedTree(1, [], 0)]
    out = []
    for g in nx.nonisomorphic_trees(n):
        out.append(WeightedTree(n, [(u, v, 1.0) for u, v in sorted(g.edges())], 0))
    return out


def shape_key(tree: WeightedTree) -> str:
    g = nx.Graph()
    g.add_nodes_from(range(tree.n))
    g.add_edges_from((u, v) for u, v, _ in tree.edges)
    return nx.weisfeiler_lehman_graph_hash(g, iterations=tree.n)


def tree_delta(tree: WeightedTree) -> float:
    return tree.eccentricity_from_root() if tree.n > 1 else 0.0


def log_base(x: float, base: float) -> float:
    return math.log(x) / math.log(base)
