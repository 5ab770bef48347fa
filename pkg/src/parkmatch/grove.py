"""Groves: recursive low-diameter decompositions that keep the quotient tree.

``build_grove`` cuts a tree into connected parts of radius at most ``R/alpha``
around leaders, keeps the tree obtained by contracting each part (the
canopy), and recurses into every part with ``R/alpha``. ``GroveMatch`` then
runs one TreeMatch per canopy and routes each request down the levels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import count
from typing import Iterable

import numpy as np
from scipy.optimize import brentq

from .match_mono import Assignment, CapacityError, TreeMatch, server_counts
from .mw_search import CORE, PROLOGUE
from .tree_metric import WeightedTree

# cap on epsilon when 1/log_alpha(Delta) leaves (0, 1)
EPSILON_CAP = 0.5


class GroveError(RuntimeError):
    pass


def solve_alpha(n: int, Delta: float) -> tuple[float, float]:
    """Solve ``alpha = max(2, ln(n) * log_alpha(Delta)**2)``; return (alpha, epsilon).

    The right-hand side decreases in alpha, so the root is unique and is
    bracketed on ``[2, inf)``; plain fixed-point iteration oscillates when
    the root is below e^2, hence the bracketing solver.
    """
    if n < 2 or Delta < 2:
        raise ValueError("need n >= 2 and Delta >= 2")
    c = math.log(n)
    lnD = math.log(Delta)

    def rhs(a):
        return max(2.0, c * (lnD / math.log(a)) ** 2)

    def g(a):
        return a - rhs(a)

    if g(2.0) >= 0:
        alpha = 2.0
    else:
        hi = 4.0
        while g(hi) < 0:
            hi *= 2.0
            if hi > 1e300:
                raise ArithmeticError("alpha solver failed to bracket the root")
        alpha = brentq(g, 2.0, hi, xtol=1e-13, rtol=4 * np.finfo(float).eps, maxiter=200)
    return alpha, epsilon_for(alpha, Delta)


def epsilon_for(alpha: float, Delta: float) -> float:
    if Delta <= 1:
        return EPSILON_CAP
    eps = math.log(alpha) / math.log(Delta)
    return eps if 0 < eps < 1 else EPSILON_CAP


def grove_parameters(tree: WeightedTree, alpha: float | None = None,
                     epsilon: float | None = None) -> tuple[float, float]:
    """Default (alpha, epsilon) for a normalised tree; explicit values win."""
    Delta = tree.eccentricity_from_root() if tree.n > 1 else 1.0
    if alpha is None:
        if tree.n >= 2 and Delta >= 2:
            alpha, eps = solve_alpha(tree.n, Delta)
        else:
            alpha, eps = 2.0, EPSILON_CAP
    else:
        eps = epsilon_for(alpha, Delta)
    if epsilon is not None:
        eps = epsilon
    return float(alpha), float(eps)


# -- decomposition -----------------------------------------------------------

def _local_bfs(tree: WeightedTree, members: set, rho: int):
    """BFS order, parent and distance from ``rho`` inside the induced subtree."""
    order = [rho]
    parent = {rho: -1}
    dist = {rho: 0.0}
    i = 0
    while i < len(order):
        u = order[i]
        i += 1
        for v in tree.neighbors(u):
            if v in members and v not in parent:
                parent[v] = u
                dist[v] = dist[u] + tree.edge_weight(u, v)
                order.append(v)
    if len(order) != len(members):
        raise GroveError("vertex set does not induce a connected subtree")
    return order, parent, dist


def ldd_partition(tree: WeightedTree, rho: int, R: float, alpha: float,
                  rng: np.random.Generator, vertices: Iterable[int] | None = None,
                  z: float | None = None):
    """Ball-growing partition of the subtree induced by ``vertices``.

    The root part is the ball of radius ``z ~ U[0, R/alpha]`` around ``rho``.
    Later leaders are taken in BFS order among unassigned vertices whose parent
    is assigned; each part is the set of the leader's descendants within
    ``R/alpha`` (closed).
    Returns ``(parts, leaders)`` with parts as sorted vertex tuples.
    """
    members = set(range(tree.n)) if vertices is None else set(vertices)
    order, parent, dist = _local_bfs(tree, members, rho)
    radius = R / alpha
    if z is None:
        z = rng.uniform(0.0, radius)
    tol = 1e-12 * max(radius, 1.0)
    children: dict[int, list[int]] = {v: [] for v in order}
    for v in order[1:]:
        children[parent[v]].append(v)

    part_of: dict[int, int] = {}
    parts = [[v for v in order if dist[v] <= z + tol]]
    leaders = [rho]
    for v in parts[0]:
        part_of[v] = 0
    for v in order:
        if v in part_of:
            continue
        k = len(parts)
        part = [v]
        part_of[v] = k
        stack = [(v, 0.0)]
        while stack:
            u, du = stack.pop()
            for c in children[u]:
                dc = du + tree.edge_weight(u, c)
                if dc <= radius + tol:
                    part_of[c] = k
                    part.append(c)
                    stack.append((c, dc))
        parts.append(part)
        leaders.append(v)
    return [tuple(sorted(p)) for p in parts], leaders


@dataclass(eq=False)
class Grove:
    """One node of a grove: a canopy over parts, each with its own subgrove.

    A leaf grove holds a single original vertex and has no canopy.
    """

    vertices: tuple[int, ...]
    root: int
    depth: int
    R: float
    parts: tuple[tuple[int, ...], ...] = ()
    leaders: tuple[int, ...] = ()
    canopy: WeightedTree | None = None
    canopy_edges: tuple[tuple[int, int, int, int], ...] = ()   # (Pi, Pj, u, v)
    children: list["Grove"] = field(default_factory=list)
    part_of: dict = field(default_factory=dict)
    uid: int = 0

    @property
    def is_leaf(self) -> bool:
        return len(self.vertices) == 1

    def walk(self):
        yield self
        for c in self.children:
            yield from c.walk()

    def max_hops(self) -> int:
        return 0 if self.canopy is None else max(self.canopy.depth)

    def closest(self, tree: WeightedTree, v: int) -> int:
        """The vertex of this grove nearest to ``v`` in the original tree."""
        if v in self.part_of or (self.is_leaf and v == self.vertices[0]):
            return v
        vs = set(self.vertices)
        for x in tree.path(v, self.root):
            if x in vs:
                return x
        raise GroveError("unreachable: grove vertex sets are connected")


@dataclass(eq=False)
class GroveEmbedding:
    tree: WeightedTree
    root: Grove
    alpha: float
    Delta: float
    edge_depth: dict            # (min(u,v), max(u,v)) -> depth
    edge_owner: dict            # (min(u,v), max(u,v)) -> Grove whose canopy holds it

    def nodes(self):
        return self.root.walk()

    def depth_of(self, u: int, v: int) -> int:
        key = (min(u, v), max(u, v))
        if key not in self.edge_depth:
            raise KeyError(f"({u}, {v}) is not an edge of the tree")
        return self.edge_depth[key]

    def edge_length(self, u: int, v: int) -> float:
        return self.Delta / self.alpha ** (self.depth_of(u, v) - 1)

    def d_G(self, u: int, v: int) -> float:
        return float(sum(self.edge_length(a, b) for a, b in self.tree.path_edges(u, v)))

    def dump(self) -> list[str]:
        out = []

        def rec(g: Grove, indent: int):
            pad = "  " * indent
            if g.is_leaf:
                out.append(f"{pad}tree depth={g.depth} parts=1")
                out.append(f"{pad}  part 0 leader={g.root} members={g.root}")
                return
            out.append(f"{pad}tree depth={g.depth} parts={len(g.parts)}")
            for i, (p, ld) in enumerate(zip(g.parts, g.leaders)):
                out.append(f"{pad}  part {i} leader={ld} members={','.join(map(str, p))}")
            for pi, pj, u, v in g.canopy_edges:
                out.append(f"{pad}  edge {pi} {pj} via {u} {v}")
            for c in g.children:
                rec(c, indent + 1)

        rec(self.root, 0)
        return out


def grove_build(tree: WeightedTree, rho: int, R: float, alpha: float, depth: int,
                rng: np.random.Generator, vertices: Iterable[int] | None = None,
                max_depth: int | None = None, _ids=None) -> Grove:
    members = tuple(sorted(range(tree.n) if vertices is None else vertices))
    ids = count() if _ids is None else _ids
    if max_depth is not None and depth > max_depth:
        raise GroveError(f"recursion depth {depth} exceeds the safety cap {max_depth}")
    if len(members) == 1:
        return Grove(members, members[0], depth, R, uid=next(ids))
    uid = next(ids)
    parts, leaders = ldd_partition(tree, rho, R, alpha, rng, vertices=members)
    part_of = {v: i for i, p in enumerate(parts) for v in p}
    canopy_edges = []
    member_set = set(members)
    for v in members:
        p = tree.parent[v]
        if p >= 0 and p in member_set and part_of[p] != part_of[v]:
            canopy_edges.append((part_of[p], part_of[v], p, v))
    canopy_edges.sort()
    canopy = WeightedTree(len(parts), [(i, j, 1.0) for i, j, _, _ in canopy_edges], 0)
    children = [grove_build(tree, ld, R / alpha, alpha, depth + 1, rng, vertices=p,
                            max_depth=max_depth, _ids=ids)
                for p, ld in zip(parts, leaders)]
    return Grove(members, rho, depth, R, tuple(parts), tuple(leaders), canopy,
                 tuple(canopy_edges), children, part_of, uid)


def build_grove(tree: WeightedTree, alpha: float, rng: np.random.Generator) -> GroveEmbedding:
    """Grove of the whole tree rooted at ``tree.root`` with ``R = Delta``."""
    if tree.n == 1:
        root = Grove((tree.root,), tree.root, 1, 0.0)
        return GroveEmbedding(tree, root, alpha, 0.0, {}, {})
    Delta = tree.eccentricity_from_root()
    L = math.log(Delta) / math.log(alpha) if Delta > 1 else 0.0
    max_depth = int(10 * max(L, 0.0) + 10)
    root = grove_build(tree, tree.root, Delta, alpha, 1, rng, max_depth=max_depth)
    edge_depth, edge_owner = {}, {}
    for g in root.walk():
        for _, _, u, v in g.canopy_edges:
            key = (min(u, v), max(u, v))
            if key in edge_depth:
                raise GroveError(f"edge {key} appears in two canopies")
            edge_depth[key] = g.depth
            edge_owner[key] = g
    if len(edge_depth) != tree.n - 1:
        raise GroveError("some tree edge is in no canopy")
    return GroveEmbedding(tree, root, alpha, Delta, edge_depth, edge_owner)


def edge_depth(grove: GroveEmbedding, u: int, v: int) -> int:
    return grove.depth_of(u, v)


def d_G(grove: GroveEmbedding, u: int, v: int) -> float:
    return grove.d_G(u, v)


# -- matching on a grove -----------------------------------------------------

@dataclass
class Dispatch:
    depth: int
    uid: int
    x: int
    y: int


class GroveMatch:
    """Route each request down the grove, one TreeMatch per canopy."""

    def __init__(self, grove: GroveEmbedding, servers, epsilon: float):
        self.grove = grove
        self.tree = grove.tree
        self.epsilon = float(epsilon)
        self.count = server_counts(self.tree.n, servers)
        self.initial = self.count.copy()
        self._matchers: dict[int, TreeMatch] = {}
        self.assignments: list[Assignment] = []
        self.charges: dict[tuple[int, int], dict[str, float]] = {}

    def matcher(self, g: Grove) -> TreeMatch:
        # a canopy no request has reached still holds its initial servers
        tm = self._matchers.get(g.uid)
        if tm is None:
            per_part = {i: int(self.initial[list(p)].sum()) for i, p in enumerate(g.parts)}
            tm = TreeMatch(g.canopy, per_part, self.epsilon)
            self._matchers[g.uid] = tm
        return tm

    @staticmethod
    def _phase(tm: TreeMatch) -> str:
        if tm.shadow is not None:
            return tm.shadow.phase
        return tm.mode

    def decide(self, v: int, rng: np.random.Generator):
        """Sample the full dispatch for a request at ``v`` without committing."""
        self.tree._check(v)
        if self.count.sum() == 0:
            raise CapacityError("no unmatched servers remain")
        plan = []
        g = self.grove.root
        while not g.is_leaf:
            x = g.part_of[g.closest(self.tree, v)]
            tm = self.matcher(g)
            dec = tm.decide(x, rng)
            plan.append((g, x, dec))
            g = g.children[dec.server]
        return g.vertices[0], plan

    def response_law(self, v: int) -> dict[int, float]:
        """Exact law of the matched vertex for a request at ``v`` right now."""
        self.tree._check(v)
        if self.count.sum() == 0:
            raise CapacityError("no unmatched servers remain")

        def rec(g: Grove) -> dict[int, float]:
            if g.is_leaf:
                return {g.vertices[0]: 1.0}
            x = g.part_of[g.closest(self.tree, v)]
            out: dict[int, float] = {}
            for y, p in self.matcher(g).response_law(x).items():
                if p <= 0:
                    continue
                for s, q in rec(g.children[y]).items():
                    out[s] = out.get(s, 0.0) + p * q
            return out

        return rec(self.grove.root)

    def serve(self, v: int, rng: np.random.Generator) -> tuple[int, list[Dispatch]]:
        s, plan = self.decide(v, rng)
        trace = []
        phases = {}
        for g, x, dec in plan:
            tm = self.matcher(g)
            phases[g.uid] = self._phase(tm)
            tm.apply(x, dec)
            trace.append(Dispatch(g.depth, g.uid, x, dec.server))
        leaf = plan[-1][0].children[plan[-1][2].server] if plan else self.grove.root
        trace.append(Dispatch(leaf.depth, leaf.uid, s, s))
        if self.count[s] <= 0:
            raise CapacityError(f"dispatch reached {s} which has no free server")
        self.count[s] -= 1
        cost = self.tree.distance(v, s)
        self.assignments.append(Assignment(v, s, cost))
        for a, b in self.tree.path_edges(v, s):
            owner = self.grove.edge_owner[(min(a, b), max(a, b))]
            key = (owner.depth, owner.uid)
            label = phases.get(owner.uid, "off_route")
            slot = self.charges.setdefault(key, {})
            slot[label] = slot.get(label, 0.0) + self.tree.edge_weight(a, b)
        return s, trace

    def grove_match_serve(self, v: int, rng: np.random.Generator):
        return self.serve(v, rng)

    @property
    def total_cost(self) -> float:
        return float(sum(a.cost for a in self.assignments))

    def charge_summary(self) -> dict[str, float]:
        out = {PROLOGUE: 0.0, CORE: 0.0}
        for slot in self.charges.values():
            for k, c in slot.items():
                out[k] = out.get(k, 0.0) + c
        return out


@dataclass
class GroveMatchResult:
    assignments: list[Assignment]
    total_cost: float
    charges: dict
    grove: GroveEmbedding

    def lines(self) -> list[str]:
        out = [f"match {i} {a.server} {a.cost:.12g}" for i, a in enumerate(self.assignments)]
        for (depth, uid), slot in sorted(self.charges.items()):
            for label, c in sorted(slot.items()):
                out.append(f"charge depth={depth} tree={uid} phase={label} cost={c:.12g}")
        out.append(f"total {self.total_cost:.12g}")
        return out


def run_grove_match(tree: WeightedTree, servers, requests, rng: np.random.Generator,
                    alpha: float | None = None, epsilon: float | None = None,
                    grove: GroveEmbedding | None = None) -> GroveMatchResult:
    requests = list(requests)
    alpha, epsilon = grove_parameters(tree, alpha, epsilon)
    if grove is None:
        grove = build_grove(tree, alpha, rng)
    gm = GroveMatch(grove, servers, epsilon)
    if len(requests) > gm.count.sum():
        raise CapacityError("more requests than servers")
    for v in requests:
        gm.serve(v, rng)
    return GroveMatchResult(gm.assignments, gm.total_cost, gm.charges, grove)
