"""TreeSearch: online metrical search on a rooted tree via multiplicative weights.

A car parks on spots of a tree; spots are decommissioned one at a time until a
single spot survives. There is one expert per leaf-spot (a spot with no other
spot below it); expert ``sigma`` recommends parking on the root-to-leaf path
``paths[sigma]``. The algorithm keeps the committed expert ``gamma``
distributed exactly as the normalised expert weights restricted to the alive
experts.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .rng import draw
from .tree_metric import WeightedTree

PROLOGUE = "prologue"
CORE = "core"

ROOT_REGION = "root"
FRONTIER = "frontier"
OUTER = "outer"


class SearchError(RuntimeError):
    """Logic error inside the search (dead spot killed, no expert left, ...)."""


class SearchTerminated(SearchError):
    """No alive expert remains to move the car to."""


@dataclass(frozen=True)
class SearchInstance:
    tree: WeightedTree
    spots: tuple[int, ...]
    start: int
    kills: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "spots", tuple(sorted(int(s) for s in self.spots)))
        object.__setattr__(self, "kills", tuple(int(r) for r in self.kills))
        n = self.tree.n
        if not self.spots:
            raise ValueError("a search instance needs at least one spot")
        if len(set(self.spots)) != len(self.spots):
            raise ValueError("at most one spot per vertex")
        if any(not 0 <= s < n for s in self.spots) or not 0 <= self.start < n:
            raise ValueError("spot or start outside the tree")
        spot_set = set(self.spots)
        if len(set(self.kills)) != len(self.kills):
            raise ValueError("decommission order repeats a spot")
        if not set(self.kills) <= spot_set:
            raise ValueError("decommission order names a vertex without a spot")
        if len(self.kills) != len(self.spots) - 1:
            raise ValueError("exactly one spot must survive")

    @property
    def survivor(self) -> int:
        (s,) = set(self.spots) - set(self.kills)
        return s


@dataclass(frozen=True)
class ExpertIndex:
    """Leaf-spots, the spot path of each expert, and the reverse map."""

    spots: tuple[int, ...]
    leaf_spots: tuple[int, ...]
    paths: tuple[tuple[int, ...], ...]   # spots on root -> leaf-spot, root first
    experts_of: dict                      # spot -> tuple of experts whose path holds it

    @property
    def d(self) -> int:
        return len(self.leaf_spots)

    @property
    def H(self) -> int:
        return max(len(p) for p in self.paths)


def build_expert_index(tree: WeightedTree, spots: Iterable[int]) -> ExpertIndex:
    spots = tuple(sorted(set(int(s) for s in spots)))
    if not spots:
        raise ValueError("no spots")
    is_spot = [False] * tree.n
    for s in spots:
        is_spot[s] = True
    below = [False] * tree.n  # some spot strictly below v
    for v in reversed(tree.bfs_order):
        p = tree.parent[v]
        if p >= 0 and (is_spot[v] or below[v]):
            below[p] = True
    leaf_spots = tuple(s for s in spots if not below[s])
    paths = []
    experts_of: dict[int, list[int]] = {s: [] for s in spots}
    for sigma, leaf in enumerate(leaf_spots):
        p = tuple(v for v in reversed(tree.ancestors(leaf)) if is_spot[v])
        paths.append(p)
        for s in p:
            experts_of[s].append(sigma)
    return ExpertIndex(spots, leaf_spots, tuple(paths),
                       {s: tuple(e) for s, e in experts_of.items()})


def q_distribution(weights: np.ndarray, X: Sequence[int], Y: Sequence[int],
                   F: Sequence[int], sigma: int, epsilon: float) -> np.ndarray:
    """Re-parking law over experts when the car's spot is decommissioned.

    ``X``: alive experts containing the decommissioned spot, ``Y``: alive
    experts avoiding it, ``F`` (subset of ``X``): experts it kills, ``sigma``:
    the committed expert (must lie in ``X``).
    """
    d = len(weights)
    Fs = set(F)
    XF = [t for t in X if t not in Fs]
    if sigma not in set(X):
        raise SearchError(f"committed expert {sigma} does not contain the decommissioned spot")
    if not XF and not Y:
        raise SearchTerminated("no alive expert remains")
    q = np.zeros(d)
    if Y:
        w_y = weights[list(Y)]
        denom = (1.0 - epsilon) * weights[XF].sum() + w_y.sum()
        scale = epsilon if sigma not in Fs else 1.0
        q[list(Y)] = scale * w_y / denom
    if XF:
        q[XF] = (1.0 - q[list(Y)].sum()) / len(XF) if Y else 1.0 / len(XF)
    return q


@dataclass
class Step:
    t: int
    r: int
    region: str
    car: int
    gamma: int | None
    jumped: bool
    phase: str


class TreeSearch:
    """Live TreeSearch state: car position, phase, committed expert, counters."""

    def __init__(self, tree: WeightedTree, index: ExpertIndex, epsilon: float,
                 alive: Iterable[int] | None = None):
        if not 0.0 < epsilon < 1.0:
            raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
        self.tree = tree
        self.index = index
        self.epsilon = float(epsilon)
        self.alive = np.zeros(tree.n, dtype=bool)
        self.alive[list(index.spots if alive is None else alive)] = True
        if not set(np.flatnonzero(self.alive)) <= set(index.spots):
            raise ValueError("alive spots must come from the index")
        self.alive_count = np.array(
            [sum(self.alive[s] for s in p) for p in index.paths], dtype=int)
        self.n = np.zeros(index.d, dtype=int)
        self.car: int | None = None
        self.phase = PROLOGUE
        self.gamma: int | None = None
        self.t = 0
        self.placement_moved = False
        self.prologue_jumps = 0
        self.core_jumps = 0
        self.prologue_distance = 0.0
        self.core_distance = 0.0
        self.placement_distance = 0.0

    # -- derived quantities ---------------------------------------------

    def weights(self) -> np.ndarray:
        return (1.0 - self.epsilon) ** self.n

    def alive_experts(self) -> list[int]:
        return [int(s) for s in np.flatnonzero(self.alive_count > 0)]

    def z(self, v: int) -> int:
        """Number of alive spots on the path v -> root, inclusive."""
        return int(sum(self.alive[a] for a in self.tree.ancestors(v)))

    def region_of(self, v: int) -> str:
        z = self.z(v)
        return ROOT_REGION if z == 0 else FRONTIER if z == 1 else OUTER

    def first_alive(self, sigma: int, skip: int | None = None) -> int | None:
        for s in self.index.paths[sigma]:
            if self.alive[s] and s != skip:
                return s
        return None

    def sets_xyf(self, r: int) -> tuple[list[int], list[int], list[int]]:
        if not self.alive[r]:
            raise SearchError(f"spot {r} is not in commission")
        containing = set(self.index.experts_of[r])
        A = self.alive_experts()
        X = [s for s in A if s in containing]
        Y = [s for s in A if s not in containing]
        F = [s for s in X if self.alive_count[s] == 1]
        return X, Y, F

    def compute_q(self, sigma: int, r: int) -> np.ndarray:
        X, Y, F = self.sets_xyf(r)
        return q_distribution(self.weights(), X, Y, F, sigma, self.epsilon)

    def pi_tilde(self) -> np.ndarray:
        A = self.alive_experts()
        if not A:
            raise SearchError("all experts are dead")
        w = self.weights()
        out = np.zeros(self.index.d)
        out[A] = w[A] / w[A].sum()
        return out

    # -- the car's next move ---------------------------------------------

    def _ancestor_spot(self, v: int, skip: int | None) -> int | None:
        for a in self.tree.ancestors(v):
            if self.alive[a] and a != skip:
                return a
        return None

    def move_options(self, origin: int | None = None) -> list[tuple[int | None, int, float]]:
        """Law of the car's next move if its current spot disappeared now.

        Returns ``(new_gamma, destination, probability)`` triples; ``new_gamma``
        is None when the move stays within the prologue. Pure: no state change.
        ``origin`` overrides the car position (used for the initial placement).
        """
        c = self.car if origin is None else origin
        if c is None:
            raise SearchError("car has not been placed")
        if self.phase == PROLOGUE:
            a = self._ancestor_spot(c, skip=c)
            if a is not None:
                return [(None, a, 1.0)]
            alive_after = [s for s in self.alive_experts()
                           if not (self.alive[c] and c in self.index.paths[s] and self.alive_count[s] == 1)]
            if not alive_after:
                raise SearchTerminated("no alive expert remains")
            p = 1.0 / len(alive_after)
            return [(s, self.first_alive(s, skip=c), p) for s in alive_after]
        q = self.compute_q(self.gamma, c)
        return [(int(s), self.first_alive(int(s), skip=c), float(q[s]))
                for s in np.flatnonzero(q > 0)]

    def destination_law(self, origin: int | None = None) -> dict[int, float]:
        law: dict[int, float] = {}
        for _, dest, p in self.move_options(origin):
            law[dest] = law.get(dest, 0.0) + p
        return law

    def choose(self, rng: np.random.Generator, origin: int | None = None):
        opts = self.move_options(origin)
        if len(opts) == 1:
            # a point mass still consumes one uniform to keep streams aligned
            rng.random()
            return opts[0]
        return draw(opts, [p for *_, p in opts], rng)

    # -- state transitions ------------------------------------------------

    def _kill(self, r: int) -> None:
        self.alive[r] = False
        for s in self.index.experts_of[r]:
            self.alive_count[s] -= 1

    def _travel(self, src: int, dest: int, transition: bool, placement: bool) -> None:
        tree = self.tree
        if placement:
            self.placement_distance += tree.distance(src, dest)
            return
        if transition:
            # the root-ward leg bills to the prologue, the descent to the core
            a = tree.lca(src, dest)
            self.prologue_distance += tree.distance(src, a)
            self.core_distance += tree.distance(a, dest)
        elif self.phase == PROLOGUE:
            self.prologue_distance += tree.distance(src, dest)
        else:
            self.core_distance += tree.distance(src, dest)

    def _apply_move(self, choice, placement: bool = False) -> None:
        new_gamma, dest, _ = choice
        src = self.car
        transition = self.phase == PROLOGUE and new_gamma is not None
        self._travel(src, dest, transition, placement)
        if placement:
            self.placement_moved = True
        elif self.phase == PROLOGUE:
            self.prologue_jumps += 1
        else:
            self.core_jumps += 1
        if transition:
            self.phase = CORE
        if new_gamma is not None:
            self.gamma = new_gamma
        self.car = dest

    def place(self, start: int, rng: np.random.Generator, choice=None) -> None:
        """Park the car at ``start`` and apply the prologue rules once."""
        if self.car is not None:
            raise SearchError("car already placed")
        self.tree._check(start)
        self.car = start
        if self.alive[start]:
            return
        if choice is None:
            choice = self.choose(rng, origin=start)
        self._apply_move(choice, placement=True)

    def prologue_step(self, r: int, rng: np.random.Generator, choice=None) -> Step:
        if self.phase != PROLOGUE:
            raise SearchError("not in the prologue")
        return self._step(r, rng, choice)

    def core_step(self, r: int, rng: np.random.Generator, choice=None) -> Step:
        if self.phase != CORE:
            raise SearchError("not in the core phase")
        return self._step(r, rng, choice)

    def decommission(self, r: int, rng: np.random.Generator, choice=None) -> Step:
        return self._step(r, rng, choice)

    def _step(self, r: int, rng, choice) -> Step:
        if self.car is None:
            raise SearchError("car has not been placed")
        if not (0 <= r < self.tree.n) or not self.alive[r]:
            raise SearchError(f"spot {r} is not in commission")
        phase = self.phase
        region = self.region_of(r) if phase == CORE else (
            FRONTIER if self.z(r) == 1 else OUTER)
        jumped = False
        if r == self.car:
            if choice is None:
                choice = self.choose(rng)
            # q was evaluated on pre-decommission weights; counters update after
            if phase == CORE and region == FRONTIER:
                for s in self.index.experts_of[r]:
                    self.n[s] += 1
            self._kill(r)
            self._apply_move(choice)
            jumped = True
        else:
            if phase == CORE and region == FRONTIER:
                for s in self.index.experts_of[r]:
                    self.n[s] += 1
            self._kill(r)
        self.t += 1
        return Step(self.t, r, region, self.car, self.gamma, jumped, phase)

    def check_frontier(self) -> bool:
        return self.phase != CORE or self.region_of(self.car) == FRONTIER


@dataclass
class SearchTrace:
    steps: list[Step]
    start: int
    placement_car: int
    final_car: int
    H: int
    d: int
    epsilon: float
    prologue_jumps: int
    core_jumps: int
    placement_moved: bool
    prologue_distance: float
    core_distance: float
    placement_distance: float
    core_start: int | None = None   # index of the first kill handled in the core phase

    @property
    def total_distance(self) -> float:
        return self.placement_distance + self.prologue_distance + self.core_distance

    @property
    def total_jumps(self) -> int:
        return self.prologue_jumps + self.core_jumps

    def lines(self) -> list[str]:
        out = [f"t=0 region=start car={self.placement_car} gamma=- jump={int(self.placement_moved)}"]
        for s in self.steps:
            g = "-" if s.gamma is None else str(s.gamma)
            out.append(f"t={s.t} region={s.region} car={s.car} gamma={g} jump={int(s.jumped)}")
        return out


def run_tree_search(instance: SearchInstance, epsilon: float,
                    rng: np.random.Generator) -> SearchTrace:
    index = build_expert_index(instance.tree, instance.spots)
    search = TreeSearch(instance.tree, index, epsilon)
    search.place(instance.start, rng)
    placement_car = search.car
    steps = []
    core_start = 0 if search.phase == CORE else None
    for i, r in enumerate(instance.kills):
        if core_start is None and search.phase == CORE:
            core_start = i
        steps.append(search.decommission(r, rng))
    if core_start is None and search.phase == CORE:
        core_start = len(instance.kills)
    return SearchTrace(
        steps=steps, start=instance.start, placement_car=placement_car,
        final_car=search.car, H=index.H, d=index.d, epsilon=epsilon,
        prologue_jumps=search.prologue_jumps, core_jumps=search.core_jumps,
        placement_moved=search.placement_moved,
        prologue_distance=search.prologue_distance, core_distance=search.core_distance,
        placement_distance=search.placement_distance, core_start=core_start)


# -- vectorised Monte Carlo over many independent runs ----------------------

@dataclass
class BatchResult:
    """Many independent TreeSearch runs on one instance, simulated together."""

    trials: int
    d: int
    H: int
    epsilon: float
    core_times: list[int]            # kill indices handled in the core phase
    pi_tilde: np.ndarray             # (len(core_times) + 1, d) analytic law of gamma
    occupancy: np.ndarray            # (len(core_times) + 1, d) counts of gamma
    prologue_jumps: int              # deterministic
    core_jumps: np.ndarray           # (trials,)
    expected_core_jumps: float       # exact expectation from the invariant
    final_cars: np.ndarray = field(repr=False, default=None)


def simulate_batch(instance: SearchInstance, epsilon: float, trials: int,
                   rng: np.random.Generator) -> BatchResult:
    """Run ``trials`` independent copies of TreeSearch on ``instance``.

    The prologue, the alive sets and the weight counters do not depend on the
    algorithm's coins, so they are computed once; only ``gamma`` is per-trial.
    """
    index = build_expert_index(instance.tree, instance.spots)
    d = index.d
    search = TreeSearch(instance.tree, index, epsilon)
    gamma = None
    kills = list(instance.kills)

    def transition_draw(origin):
        opts = search.move_options(origin)
        experts = np.array([g for g, _, _ in opts])
        return experts[rng.integers(len(experts), size=trials)]

    search.car = instance.start
    i = 0
    if not search.alive[instance.start]:
        opts = search.move_options(instance.start)
        if opts[0][0] is None:
            search._apply_move(opts[0], placement=True)
        else:
            gamma = transition_draw(instance.start)
            search.phase = CORE
    while gamma is None and i < len(kills):
        r = kills[i]
        if r == search.car:
            opts = search.move_options()
            if opts[0][0] is None:
                search._kill(r)
                search._apply_move(opts[0])
            else:
                gamma = transition_draw(None)
                search._kill(r)
                search.prologue_jumps += 1
                search.phase = CORE
        else:
            search._kill(r)
        i += 1
    prologue_jumps = search.prologue_jumps

    core_times = []
    pis = []
    occ = []
    core_jumps = np.zeros(trials, dtype=int)
    expected = 0.0
    if gamma is not None:
        for t in range(i, len(kills)):
            r = kills[t]
            pit = search.pi_tilde()
            core_times.append(t)
            pis.append(pit)
            occ.append(np.bincount(gamma, minlength=d))
            if search.z(r) == 1:
                X, Y, F = search.sets_xyf(r)
                expected += float(pit[X].sum())
                movers = np.isin(gamma, X)
                if movers.any():
                    w = search.weights()
                    Fset = set(F)
                    for killed in (False, True):
                        group = [s for s in X if (s in Fset) == killed]
                        if not group:
                            continue
                        sel = movers & np.isin(gamma, group)
                        m = int(sel.sum())
                        if m == 0:
                            continue
                        q = q_distribution(w, X, Y, F, group[0], epsilon)
                        support = np.flatnonzero(q > 0)
                        cum = np.cumsum(q[support])
                        pick = np.searchsorted(cum, rng.random(m) * cum[-1], side="right")
                        gamma[sel] = support[np.minimum(pick, len(support) - 1)]
                    core_jumps += movers
                for s in index.experts_of[r]:
                    search.n[s] += 1
            search._kill(r)
        pis.append(search.pi_tilde())
        occ.append(np.bincount(gamma, minlength=d))
    final = None
    if gamma is not None:
        final = np.array([search.first_alive(int(g)) for g in range(d)], dtype=object)[gamma]
    return BatchResult(
        trials=trials, d=d, H=index.H, epsilon=epsilon, core_times=core_times,
        pi_tilde=np.array(pis).reshape(-1, d), occupancy=np.array(occ).reshape(-1, d),
        prologue_jumps=prologue_jumps, core_jumps=core_jumps,
        expected_core_jumps=expected, final_cars=final)
