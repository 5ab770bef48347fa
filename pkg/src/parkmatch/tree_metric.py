"""Weighted rooted trees: distances, paths and ancestry queries.

Vertices are dense integers ``0..n-1``. Every traversal visits neighbours in
increasing id order so seeded runs are reproducible.
"""

from __future__ import annotations

from collections import deque
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np


class TreeError(ValueError):
    """Malformed tree input (cycles, disconnection, bad ids or weights)."""


class WeightedTree:
    """An immutable edge-weighted tree with a designated root."""

    def __init__(self, n: int, edges: Iterable[tuple[int, int, float]], root: int = 0):
        edges = [(int(u), int(v), float(w)) for u, v, w in edges]
        if n < 1:
            raise TreeError("a tree needs at least one vertex")
        if len(edges) != n - 1:
            raise TreeError(f"{n} vertices need {n - 1} edges, got {len(edges)}")
        if not 0 <= root < n:
            raise TreeError(f"root {root} is not a vertex")
        adj: list[list[tuple[int, float]]] = [[] for _ in range(n)]
        seen = set()
        for u, v, w in edges:
            if not (0 <= u < n and 0 <= v < n):
                raise TreeError(f"edge ({u}, {v}) references an unknown vertex")
            if u == v:
                raise TreeError(f"self loop at {u}")
            if not w > 0 or not np.isfinite(w):
                raise TreeError(f"edge ({u}, {v}) has non-positive weight {w}")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise TreeError(f"duplicate edge {key}")
            seen.add(key)
            adj[u].append((v, w))
            adj[v].append((u, w))
        for nbrs in adj:
            nbrs.sort()

        self.n = n
        self.root = root
        self.edges: tuple[tuple[int, int, float], ...] = tuple(edges)
        self._adj = adj

        parent = [-1] * n
        parent_weight = [0.0] * n
        depth = [0] * n
        root_dist = [0.0] * n
        order = [root]
        visited = [False] * n
        visited[root] = True
        queue = deque([root])
        while queue:
            u = queue.popleft()
            for v, w in adj[u]:
                if visited[v]:
                    continue
                visited[v] = True
                parent[v] = u
                parent_weight[v] = w
                depth[v] = depth[u] + 1
                root_dist[v] = root_dist[u] + w
                order.append(v)
                queue.append(v)
        if len(order) != n:
            # n-1 edges and disconnected means a cycle somewhere
            raise TreeError("edges do not form a connected acyclic graph")

        self.parent: tuple[int, ...] = tuple(parent)
        self.parent_weight: tuple[float, ...] = tuple(parent_weight)
        self.depth: tuple[int, ...] = tuple(depth)
        self.root_dist: tuple[float, ...] = tuple(root_dist)
        self.bfs_order: tuple[int, ...] = tuple(order)
        children: list[list[int]] = [[] for _ in range(n)]
        for v in order[1:]:
            children[parent[v]].append(v)
        self.children: tuple[tuple[int, ...], ...] = tuple(tuple(c) for c in children)

    # -- construction helpers -------------------------------------------

    @classmethod
    def from_parents(cls, parents: Sequence[int], weights: Sequence[float] | None = None,
                     root: int = 0) -> "WeightedTree":
        """Build from a parent array (``parents[root]`` is ignored)."""
        n = len(parents)
        if weights is None:
            weights = [1.0] * n
        edges = [(parents[v], v, weights[v]) for v in range(n) if v != root]
        return cls(n, edges, root)

    def with_root(self, root: int) -> "WeightedTree":
        return WeightedTree(self.n, self.edges, root)

    def __repr__(self) -> str:
        return f"WeightedTree(n={self.n}, root={self.root}, edges={list(self.edges)!r})"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, WeightedTree):
            return NotImplemented
        return (self.n, self.root, self._edge_key()) == (other.n, other.root, other._edge_key())

    def __hash__(self) -> int:
        return hash((self.n, self.root, self._edge_key()))

    def _edge_key(self):
        return tuple(sorted((min(u, v), max(u, v), w) for u, v, w in self.edges))

    # -- queries ---------------------------------------------------------

    def _check(self, *vs: int) -> None:
        for v in vs:
            if not (isinstance(v, (int, np.integer)) and 0 <= v < self.n):
                raise TreeError(f"unknown vertex {v!r}")

    def neighbors(self, v: int) -> list[int]:
        self._check(v)
        return [u for u, _ in self._adj[v]]

    def edge_weight(self, u: int, v: int) -> float:
        self._check(u, v)
        for x, w in self._adj[u]:
            if x == v:
                return w
        raise TreeError(f"({u}, {v}) is not an edge")

    def lca(self, u: int, v: int) -> int:
        self._check(u, v)
        depth, parent = self.depth, self.parent
        while depth[u] > depth[v]:
            u = parent[u]
        while depth[v] > depth[u]:
            v = parent[v]
        while u != v:
            u, v = parent[u], parent[v]
        return u

    def path(self, u: int, v: int) -> list[int]:
        """Vertices of the unique u-v path, endpoints included."""
        a = self.lca(u, v)
        up = []
        x = u
        while x != a:
            up.append(x)
            x = self.parent[x]
        down = []
        x = v
        while x != a:
            down.append(x)
            x = self.parent[x]
        return up + [a] + down[::-1]

    def path_edges(self, u: int, v: int) -> list[tuple[int, int]]:
        p = self.path(u, v)
        return list(zip(p[:-1], p[1:]))

    @cached_property
    def distance_matrix(self) -> np.ndarray:
        """All-pairs distances, one BFS per source."""
        n = self.n
        dist = np.zeros((n, n))
        for s in range(n):
            row = dist[s]
            seen = [False] * n
            seen[s] = True
            stack = [s]
            while stack:
                u = stack.pop()
                for v, w in self._adj[u]:
                    if not seen[v]:
                        seen[v] = True
                        row[v] = row[u] + w
                        stack.append(v)
        # summing from either end can differ in the last bit; keep it symmetric
        dist = np.triu(dist) + np.triu(dist, 1).T
        dist.setflags(write=False)
        return dist

    def distance(self, u: int, v: int) -> float:
        self._check(u, v)
        return float(self.distance_matrix[u, v])

    def is_between(self, u: int, v: int, s: int) -> bool:
        """True iff v lies on the u-s path (endpoints count)."""
        self._check(u, v, s)
        # v is on the path iff the u-v-s detour is tight; done combinatorially
        a = self.lca(u, s)
        if self.lca(v, a) != a:
            return False
        return self.lca(u, v) == v or self.lca(s, v) == v

    def is_ancestor(self, a: int, v: int) -> bool:
        """True iff a is on the path from v to the root."""
        self._check(a, v)
        while self.depth[v] > self.depth[a]:
            v = self.parent[v]
        return v == a

    def ancestors(self, v: int) -> list[int]:
        """Path from v up to the root, inclusive of both."""
        self._check(v)
        out = [v]
        while v != self.root:
            v = self.parent[v]
            out.append(v)
        return out

    def subtree(self, v: int) -> list[int]:
        self._check(v)
        out = [v]
        i = 0
        while i < len(out):
            out.extend(self.children[out[i]])
            i += 1
        return out

    def eccentricity_from_root(self) -> float:
        if self.n < 2:
            raise TreeError("eccentricity of a single-vertex tree is degenerate")
        return max(self.root_dist)

    def min_edge_weight(self) -> float:
        return min(w for _, _, w in self.edges) if self.edges else 1.0

    def normalize(self) -> "WeightedTree":
        """Rescale all weights so the smallest edge (= smallest distance) is 1."""
        if not self.edges:
            return self
        m = self.min_edge_weight()
        return WeightedTree(self.n, [(u, v, w / m) for u, v, w in self.edges], self.root)

    def unit(self) -> "WeightedTree":
        return WeightedTree(self.n, [(u, v, 1.0) for u, v, _ in self.edges], self.root)


def distance(tree: WeightedTree, u: int, v: int) -> float:
    return tree.distance(u, v)


def path(tree: WeightedTree, u: int, v: int) -> list[int]:
    return tree.path(u, v)


def is_between(tree: WeightedTree, u: int, v: int, s: int) -> bool:
    return tree.is_between(u, v, s)


def eccentricity_from_root(tree: WeightedTree) -> float:
    return tree.eccentricity_from_root()


def normalize(tree: WeightedTree) -> WeightedTree:
    return tree.normalize()
