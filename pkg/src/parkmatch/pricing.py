"""Posted prices for monotone matching algorithms on a tree.

A monotone partition splits the tree into connected parts, each led by a free
server inside it; ``price_partition`` sets prices under which every selfish
request picks its own part's leader. ``build_partition_distribution``
realises a monotone one-step matching law ``pi[i, v]`` (server ``i``, request
vertex ``v``) as a distribution over monotone partitions, by peeling leaves.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .tree_metric import WeightedTree

PRUNE = 1e-15


class PricingError(ValueError):
    pass


class NonMonotoneError(PricingError):
    def __init__(self, u: int, v: int, s: int, gap: float):
        super().__init__(f"pi not monotone: request at {u} reaches server {s} with "
                         f"probability {gap:+.3g} more than at {v}, which is on the way")
        self.u, self.v, self.s = u, v, s


@dataclass(frozen=True)
class MonotonePartition:
    """Nonempty connected parts and their leader servers, ordered by leader."""

    parts: tuple[frozenset, ...]
    leaders: tuple[int, ...]

    @classmethod
    def make(cls, pairs) -> "MonotonePartition":
        pairs = sorted(((frozenset(p), int(s)) for p, s in pairs), key=lambda x: x[1])
        return cls(tuple(p for p, _ in pairs), tuple(s for _, s in pairs))

    def leader_of(self, n: int) -> np.ndarray:
        out = np.full(n, -1, dtype=int)
        for part, s in zip(self.parts, self.leaders):
            out[list(part)] = s
        return out

    def part_index(self, v: int) -> int:
        for i, p in enumerate(self.parts):
            if v in p:
                return i
        raise KeyError(v)

    def validate(self, tree: WeightedTree, locs: Sequence[int]) -> None:
        seen = set()
        for part, s in zip(self.parts, self.leaders):
            if not part:
                raise PricingError("empty part")
            if seen & part:
                raise PricingError("parts overlap")
            seen |= part
            if locs[s] not in part:
                raise PricingError(f"leader {s} sits outside its part")
            root = min(part)
            reach, stack = {root}, [root]
            while stack:
                u = stack.pop()
                for w in tree.neighbors(u):
                    if w in part and w not in reach:
                        reach.add(w)
                        stack.append(w)
            if reach != part:
                raise PricingError("part is not connected")
        if seen != set(range(tree.n)):
            raise PricingError("parts do not cover the tree")
        if len(set(self.leaders)) != len(self.leaders):
            raise PricingError("a server leads two parts")

    def lines(self, prob: float | None = None) -> list[str]:
        head = "partition" if prob is None else f"partition p={prob:.17g}"
        return [head] + [f"part leader={s} members={','.join(map(str, sorted(p)))}"
                         for p, s in zip(self.parts, self.leaders)]


@dataclass
class PartitionDistribution:
    entries: list[tuple[MonotonePartition, float]]
    audit: list[dict] = field(default_factory=list, repr=False)

    def total(self) -> float:
        return math.fsum(p for _, p in self.entries)

    def sample(self, rng: np.random.Generator) -> MonotonePartition:
        probs = np.array([p for _, p in self.entries])
        i = rng.choice(len(probs), p=probs / probs.sum())
        return self.entries[i][0]

    def marginals(self, n: int, k: int) -> np.ndarray:
        out = np.zeros((k, n))
        for part, p in self.entries:
            lead = part.leader_of(n)
            out[lead, np.arange(n)] += p
        return out


# -- probability matrices ------------------------------------------------------

def _toward(tree: WeightedTree, target: int) -> list[int]:
    """next[a] = neighbour of a one step closer to ``target``."""
    nxt = [-1] * tree.n
    seen = {target}
    queue = deque([target])
    while queue:
        u = queue.popleft()
        for w in tree.neighbors(u):
            if w not in seen:
                seen.add(w)
                nxt[w] = u
                queue.append(w)
    return nxt


def monotonicity_violations(tree: WeightedTree, locs: Sequence[int], pi: np.ndarray,
                            tol: float = 1e-9) -> list[tuple[int, int, int, float]]:
    """(u, v, server, gap) with v next to u on the way to the server and
    pi[server, u] exceeding pi[server, v] by gap > tol. Checking consecutive
    vertices suffices because the condition chains along the path."""
    out = []
    for i, s in enumerate(locs):
        nxt = _toward(tree, s)
        for a in range(tree.n):
            b = nxt[a]
            if b >= 0 and pi[i, a] > pi[i, b] + tol:
                out.append((a, b, i, float(pi[i, a] - pi[i, b])))
    return out


def validate_pi(tree: WeightedTree, locs: Sequence[int], pi: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    pi = np.asarray(pi, dtype=float)
    if pi.shape != (len(locs), tree.n):
        raise PricingError(f"pi must have shape (servers, vertices) = {(len(locs), tree.n)}")
    if (pi < -tol).any() or (pi > 1 + tol).any():
        raise PricingError("pi entries must lie in [0, 1]")
    cols = pi.sum(axis=0)
    if np.abs(cols - 1).max() > tol:
        v = int(np.argmax(np.abs(cols - 1)))
        raise PricingError(f"column {v} of pi sums to {cols[v]!r}, not 1")
    bad = monotonicity_violations(tree, locs, pi, tol)
    if bad:
        u, v, s, gap = bad[0]
        raise NonMonotoneError(u, v, s, gap)
    return np.clip(pi, 0.0, 1.0)


# -- leaf peeling --------------------------------------------------------------

def _extend(partition: MonotonePartition, v: int, u: int, new_leader: int | None) -> MonotonePartition:
    pairs = []
    for part, s in zip(partition.parts, partition.leaders):
        if new_leader is None and v in part:
            part = part | {u}
        pairs.append((part, s))
    if new_leader is not None:
        pairs.append((frozenset({u}), new_leader))
    return MonotonePartition.make(pairs)


def build_partition_distribution(tree: WeightedTree, locs: Sequence[int], pi,
                                 prune: float = PRUNE, audit: bool = False) -> PartitionDistribution:
    """Distribution over monotone partitions whose leader marginals equal ``pi``.

    Leaves are peeled in reverse BFS order from the root; a peeled leaf's
    servers move to its neighbour. Unpeeling extends each partition either by
    absorbing the leaf into its neighbour's part (when that part is led by a
    relocated server) or by splitting the mass among "leaf becomes its own part
    led by relocated server j" and "leaf joins the neighbour's part".
    """
    locs = [int(s) for s in locs]
    k = len(locs)
    if k == 0:
        raise PricingError("no servers")
    pi = validate_pi(tree, locs, pi)

    cur = list(locs)
    peel = []
    for u in reversed(tree.bfs_order[1:]):
        M = [i for i in range(k) if cur[i] == u]
        peel.append((u, tree.parent[u], M))
        for i in M:
            cur[i] = tree.parent[u]

    r = tree.root
    entries = [(MonotonePartition.make([({r}, i)]), float(pi[i, r]))
               for i in range(k) if pi[i, r] > prune]
    levels = []
    for u, v, M in reversed(peel):
        Mset = set(M)
        delta = {j: max(pi[j, u] - pi[j, v], 0.0) for j in M}
        delta_sum = math.fsum(delta.values())
        new = []
        level = {"u": u, "v": v, "M": tuple(M), "phi": np.zeros(k), "Pi": np.zeros(k),
                 "conservation": 0.0}
        for part, pr in entries:
            i = part.leaders[part.part_index(v)]
            if i in Mset:
                new.append((_extend(part, v, u, None), pr))
                level["phi"][i] += pr
                continue
            if pi[i, v] <= 0.0:
                continue
            gain = max(pi[i, v] - pi[i, u], 0.0)
            kids = []
            if delta_sum > 0.0:
                for j in M:
                    w = pr * delta[j] * gain / (delta_sum * pi[i, v])
                    if w > prune:
                        kids.append((_extend(part, v, u, j), w))
                        level["Pi"][i] += w
            # with no relocated mass to hand out, the leaf simply joins v's part
            w = pr * pi[i, u] / pi[i, v] if delta_sum > 0.0 else pr
            if w > prune:
                kids.append((_extend(part, v, u, None), w))
                level["phi"][i] += w
            level["conservation"] = max(level["conservation"],
                                        abs(math.fsum(x for _, x in kids) - pr))
            new.extend(kids)
        entries = new
        if audit:
            levels.append(level)
    total = math.fsum(p for _, p in entries)
    entries = [(part, p / total) for part, p in entries]
    return PartitionDistribution(entries, levels)


def audit_classes(dist: PartitionDistribution, pi: np.ndarray) -> float:
    """Largest deviation of the per-level class masses from their targets."""
    worst = 0.0
    for lv in dist.audit:
        u, v, M = lv["u"], lv["v"], set(lv["M"])
        for i in range(pi.shape[0]):
            if i in M:
                worst = max(worst, abs(lv["phi"][i] - pi[i, v]))
            else:
                worst = max(worst, abs(lv["phi"][i] - pi[i, u]))
                worst = max(worst, abs(lv["Pi"][i] - (pi[i, v] - pi[i, u])))
        worst = max(worst, lv["conservation"])
    return worst


@dataclass
class MarginalReport:
    max_error: float
    worst: tuple[int, int]
    passed: bool
    marginals: np.ndarray = field(repr=False)


def verify_marginals(dist: PartitionDistribution, pi, tol: float = 1e-9) -> MarginalReport:
    pi = np.asarray(pi, dtype=float)
    k, n = pi.shape
    got = dist.marginals(n, k)
    err = np.abs(got - pi)
    i, w = np.unravel_index(int(np.argmax(err)), err.shape)
    return MarginalReport(float(err.max()), (int(i), int(w)), bool(err.max() <= tol), got)


# -- prices --------------------------------------------------------------------

def _closest_in(tree: WeightedTree, part: frozenset, x: int, anchor: int) -> int:
    if x in part:
        return x
    for y in tree.path(x, anchor):
        if y in part:
            return y
    raise PricingError("part is not connected")


def price_partition(tree: WeightedTree, locs: Sequence[int], partition: MonotonePartition) -> np.ndarray:
    """Prices (inf for non-leaders) making each part's leader the unique best
    choice for every request inside the part."""
    if not partition.parts:
        raise PricingError("partition has no nonempty part")
    k = len(locs)
    prices = np.full(k, np.inf)
    parts, leaders = partition.parts, partition.leaders
    owner = np.empty(tree.n, dtype=int)
    for idx, p in enumerate(parts):
        owner[list(p)] = idx
    adj: dict[int, set] = {i: set() for i in range(len(parts))}
    for a, b, _ in tree.edges:
        if owner[a] != owner[b]:
            adj[owner[a]].add(owner[b])
            adj[owner[b]].add(owner[a])
    prices[leaders[0]] = 0.0
    done = {0}
    queue = deque([0])
    while queue:
        i = queue.popleft()
        si = leaders[i]
        for j in sorted(adj[i]):
            if j in done:
                continue
            sj = leaders[j]
            u_ij = _closest_in(tree, parts[i], locs[sj], locs[si])
            u_ji = _closest_in(tree, parts[j], locs[si], locs[sj])
            prices[sj] = prices[si] + tree.distance(u_ij, locs[si]) - tree.distance(u_ji, locs[sj])
            done.add(j)
            queue.append(j)
    return prices


def _utility(tree: WeightedTree, locs: Sequence[int], prices: np.ndarray, v: int) -> np.ndarray:
    return tree.distance_matrix[v, list(locs)] + prices


def selfish_choice(tree: WeightedTree, locs: Sequence[int], prices, v: int) -> int:
    """Server minimising distance plus price; ties go to the lowest index."""
    prices = np.asarray(prices, dtype=float)
    if not np.isfinite(prices).any():
        raise PricingError("every server is priced at infinity")
    return int(np.argmin(_utility(tree, locs, prices, v)))


def choice_margin(tree: WeightedTree, locs: Sequence[int], prices, v: int) -> float:
    """Gap between the best and second-best total cost at ``v``."""
    c = np.sort(_utility(tree, locs, np.asarray(prices, dtype=float), v))
    return float(c[1] - c[0]) if len(c) > 1 else math.inf


def price_step_for_algorithm(tree: WeightedTree, locs: Sequence[int], pi,
                             rng: np.random.Generator):
    dist = build_partition_distribution(tree, locs, pi)
    partition = dist.sample(rng)
    return partition, price_partition(tree, locs, partition)


def step_law(algorithm) -> tuple[list[int], np.ndarray]:
    """Free server locations and the exact one-step law of an online matcher.

    A vertex holding several free servers splits its probability evenly
    among them, which keeps the law monotone.
    """
    count = np.asarray(algorithm.count)
    n = len(count)
    locs = [v for v in range(n) for _ in range(int(count[v]))]
    first = {}
    for i, v in enumerate(locs):
        first.setdefault(v, i)
    pi = np.zeros((len(locs), n))
    for w in range(n):
        for v, p in algorithm.response_law(w).items():
            c = int(count[v])
            pi[first[v]:first[v] + c, w] += p / c
    return locs, pi


@dataclass
class MonotoneReport:
    passed: bool
    checked: int
    violations: list


def choice_law(tree: WeightedTree, locs: Sequence[int],
               rule: np.ndarray | Callable[[np.random.Generator], np.ndarray],
               trials: int = 0, rng: np.random.Generator | None = None) -> np.ndarray:
    """(servers, vertices) matrix of selfish choice frequencies under ``rule``."""
    k = len(locs)
    law = np.zeros((k, tree.n))
    if callable(rule):
        for _ in range(trials):
            prices = rule(rng)
            for v in range(tree.n):
                law[selfish_choice(tree, locs, prices, v), v] += 1
        return law / max(trials, 1)
    for v in range(tree.n):
        law[selfish_choice(tree, locs, rule, v), v] = 1.0
    return law


def prices_induce_monotone(tree: WeightedTree, locs: Sequence[int], rule,
                           trials: int = 0, rng: np.random.Generator | None = None) -> MonotoneReport:
    """Check that selfish responses to ``rule`` are monotone.

    ``rule`` is a price vector (checked exactly) or a callable drawing one
    from ``rng`` (checked by Monte Carlo with 3-sigma bands).
    """
    law = choice_law(tree, locs, rule, trials, rng)
    if callable(rule):
        se = np.sqrt(law * (1 - law) / max(trials, 1))
        bad = []
        for i, s in enumerate(locs):
            nxt = _toward(tree, s)
            for a in range(tree.n):
                b = nxt[a]
                if b >= 0 and law[i, a] > law[i, b] + 3 * (se[i, a] + se[i, b]) + 1e-6:
                    bad.append((a, b, i))
    else:
        bad = [(u, v, s) for u, v, s, _ in monotonicity_violations(tree, locs, law, 0.0)]
    return MonotoneReport(not bad, len(locs) * tree.n, bad)


def random_price_rule(k: int, scale: float) -> Callable[[np.random.Generator], np.ndarray]:
    """Independent uniform prices on ``[0, scale]`` for ``k`` servers."""
    def rule(rng):
        return rng.uniform(0.0, scale, size=k)
    return rule


def random_monotone_pi(tree: WeightedTree, locs: Sequence[int], rng: np.random.Generator,
                       components: int | None = None) -> np.ndarray:
    """A monotone law: a random mixture of selfish responses to random prices."""
    k = len(locs)
    if components is None:
        components = int(rng.integers(1, 6))
    scale = max(tree.eccentricity_from_root(), 1.0) * 2 if tree.n > 1 else 1.0
    weights = rng.dirichlet(np.ones(components))
    pi = np.zeros((k, tree.n))
    for w in weights:
        prices = rng.uniform(0.0, scale, size=k)
        if rng.random() < 0.3:
            # knock some servers out entirely
            off = rng.random(k) < 0.4
            if off.all():
                off[rng.integers(k)] = False
            prices[off] = np.inf
        pi += w * choice_law(tree, locs, prices)
    return pi
