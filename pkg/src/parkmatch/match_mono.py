"""TreeMatch: a monotone online matching algorithm that shadows TreeSearch.

Requests with a co-located free server are served in place. The first request
without one starts an embedded TreeSearch whose car sits where that request
arrived; while requests keep looking like a search instance (they hit free
servers, or the car's own vertex) the matcher follows the car. The first
request that does not fits neither pattern is served by a monotone one-off
rule, after which the matcher falls back to greedy nearest-server.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .mw_search import ExpertIndex, TreeSearch, build_expert_index
from .rng import draw
from .tree_metric import WeightedTree

COLOCATED = "colocated_phase"
SHADOWING = "shadowing"
FALLBACK = "fallback"


class CapacityError(RuntimeError):
    """A request arrived with no unmatched server left."""


def server_counts(n: int, servers) -> np.ndarray:
    """Multiplicity vector from a vertex list or a ``{vertex: count}`` map."""
    counts = np.zeros(n, dtype=int)
    items = servers.items() if isinstance(servers, Mapping) else ((v, 1) for v in servers)
    for v, c in items:
        if not 0 <= int(v) < n:
            raise ValueError(f"server at unknown vertex {v}")
        if c < 0:
            raise ValueError("negative server count")
        counts[int(v)] += int(c)
    return counts


@dataclass(frozen=True)
class Decision:
    server: int
    kind: str          # colocated | start | car | deviate | greedy
    choice: tuple | None = None


@dataclass
class Assignment:
    request: int
    server: int
    cost: float


class TreeMatch:
    def __init__(self, tree: WeightedTree, servers, epsilon: float):
        self.tree = tree
        self.epsilon = float(epsilon)
        self.count = server_counts(tree.n, servers)
        self.initial = self.count.copy()
        self.mode = COLOCATED
        self.shadow: TreeSearch | None = None
        self.assignments: list[Assignment] = []
        self._index: ExpertIndex | None = None

    @property
    def index(self) -> ExpertIndex:
        # built over every vertex that ever held a server, so a replayed search
        # instance sees exactly the experts TreeSearch would
        if self._index is None:
            self._index = build_expert_index(self.tree, np.flatnonzero(self.initial > 0))
        return self._index

    @property
    def car(self) -> int | None:
        return None if self.shadow is None else self.shadow.car

    @property
    def remaining(self) -> int:
        return int(self.count.sum())

    @property
    def total_cost(self) -> float:
        return float(sum(a.cost for a in self.assignments))

    # -- geometry of a deviating request ---------------------------------

    def neighbor_sets(self) -> tuple[list[int], list[int], list[int]]:
        """(Q, R, X) around the car: free spots visible from it, vertices
        reaching it without crossing Q, and everything behind Q."""
        if self.mode != SHADOWING:
            raise RuntimeError("neighbor sets are only defined while shadowing")
        c = self.car
        tree = self.tree
        Q, R = [], []
        seen = np.zeros(tree.n, dtype=bool)
        seen[c] = True
        queue = deque([c])
        while queue:
            u = queue.popleft()
            if u != c and self.count[u] > 0:
                Q.append(u)
                continue
            R.append(u)
            for w in tree.neighbors(u):
                if not seen[w]:
                    seen[w] = True
                    queue.append(w)
        Xs = [int(v) for v in np.flatnonzero(~seen)]
        return sorted(Q), sorted(R), Xs

    def _first_free_towards(self, v: int, target: int) -> int:
        for x in self.tree.path(v, target):
            if self.count[x] > 0:
                return x
        raise CapacityError("no free server on the path")

    def _greedy(self, v: int) -> int:
        free = np.flatnonzero(self.count > 0)
        dist = self.tree.distance_matrix[v, free]
        return int(free[np.argmin(dist)])  # argmin keeps the smallest id on ties

    def _fresh_search(self) -> TreeSearch:
        return TreeSearch(self.tree, self.index, self.epsilon,
                          alive=np.flatnonzero(self.count > 0))

    # -- decisions ---------------------------------------------------------

    def decide(self, v: int, rng: np.random.Generator) -> Decision:
        """Where a request at ``v`` goes, without changing any state."""
        self.tree._check(v)
        if self.remaining == 0:
            raise CapacityError("no unmatched servers remain")
        if self.mode == FALLBACK:
            return Decision(self._greedy(v), "greedy")
        if self.count[v] > 0:
            return Decision(v, "colocated")
        if self.mode == COLOCATED:
            choice = self._fresh_search().choose(rng, origin=v)
            return Decision(choice[1], "start", choice)
        c = self.car
        if v == c:
            choice = self.shadow.choose(rng)
            return Decision(choice[1], "car", choice)
        return self._deviation(v, rng)

    def _deviation(self, v: int, rng) -> Decision:
        c = self.car
        if self.count[c] > 0:
            return Decision(self._first_free_towards(v, c), "deviate")
        Q, R, _ = self.neighbor_sets()
        if v in set(R):
            law = self.shadow.destination_law()
            support = sorted(law)
            return Decision(draw(support, [law[s] for s in support], rng), "deviate")
        return Decision(self._first_free_towards(v, c), "deviate")

    def response_law(self, v: int) -> dict[int, float]:
        """Exact distribution of the server a request at ``v`` would get now."""
        self.tree._check(v)
        if self.remaining == 0:
            raise CapacityError("no unmatched servers remain")
        if self.mode == FALLBACK:
            return {self._greedy(v): 1.0}
        if self.count[v] > 0:
            return {v: 1.0}
        if self.mode == COLOCATED:
            return self._fresh_search().destination_law(origin=v)
        c = self.car
        if v == c:
            return self.shadow.destination_law()
        if self.count[c] > 0:
            return {self._first_free_towards(v, c): 1.0}
        _, R, _ = self.neighbor_sets()
        if v in set(R):
            return self.shadow.destination_law()
        return {self._first_free_towards(v, c): 1.0}

    def apply(self, v: int, decision: Decision) -> int:
        s = decision.server
        kind = decision.kind
        if kind == "colocated":
            self.count[v] -= 1
            if self.mode == SHADOWING and self.count[v] == 0 and v != self.car:
                self.shadow.decommission(v, None)
        elif kind == "start":
            self.shadow = self._fresh_search()
            self.shadow.place(v, None, choice=decision.choice)
            self.mode = SHADOWING
            self.count[s] -= 1
        elif kind == "car":
            self.shadow.decommission(v, None, choice=decision.choice)
            self.count[s] -= 1
        elif kind == "deviate":
            self.count[s] -= 1
            self.mode = FALLBACK
            self.shadow = None
        elif kind == "greedy":
            self.count[s] -= 1
        else:
            raise ValueError(f"unknown decision kind {kind!r}")
        if self.count[s] < 0:
            raise CapacityError(f"server at {s} over-matched")
        self.assignments.append(Assignment(v, s, self.tree.distance(v, s)))
        return s

    def serve(self, v: int, rng: np.random.Generator) -> int:
        return self.apply(v, self.decide(v, rng))

    def serve_request(self, v: int, rng: np.random.Generator) -> int:
        return self.serve(v, rng)

    def shadow_consistent(self) -> bool:
        """The embedded search sees exactly the free servers plus the car."""
        if self.mode != SHADOWING:
            return True
        expect = self.count > 0
        expect[self.car] = True
        return bool(np.array_equal(self.shadow.alive, expect))


@dataclass
class MatchResult:
    assignments: list[Assignment]
    total_cost: float

    def lines(self) -> list[str]:
        out = [f"match {i} {a.server} {a.cost:.12g}" for i, a in enumerate(self.assignments)]
        out.append(f"total {self.total_cost:.12g}")
        return out


def run_tree_match(tree: WeightedTree, servers, requests: Iterable[int], epsilon: float,
                   rng: np.random.Generator) -> MatchResult:
    requests = list(requests)
    matcher = TreeMatch(tree, servers, epsilon)
    if len(requests) > matcher.remaining:
        raise CapacityError("more requests than servers")
    for v in requests:
        matcher.serve(v, rng)
    return MatchResult(matcher.assignments, matcher.total_cost)


def search_as_matching(instance) -> tuple[list[int], list[int]]:
    """Servers and requests that replay a search instance: the car's start
    is the first request, each decommissioning is a request at that spot."""
    return list(instance.spots), [instance.start, *instance.kills]
