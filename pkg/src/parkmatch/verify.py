"""Statistical and exact checks of the algorithms' guarantees.

Monte Carlo checks use 3-sigma bands plus 1e-6 absolute slack. A check that
fails is re-run once with four times the trials on a fresh stream before it
is reported as failed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grove import GroveEmbedding, build_grove
from .mw_search import SearchInstance, simulate_batch
from .pricing import (build_partition_distribution, choice_margin, price_partition,
                      selfish_choice, verify_marginals)
from .tree_metric import WeightedTree

SLACK = 1e-6
SIGMAS = 3.0
OCCUPANCY_ALLOWED = 0.003


def band(p: float, N: int) -> float:
    return SIGMAS * math.sqrt(max(p * (1 - p), 0.0) / N) + SLACK


# -- occupancy -------------------------------------------------------------------

@dataclass
class OccupancyReport:
    trials: int
    cells: list[tuple[int, int, float, float, float]]   # (t, sigma, p_hat, pi_tilde, z)
    outside: int                                          # cells beyond the 3-sigma band
    flagged: list[tuple[int, int]]                        # cells with |z| > 4
    passed: bool
    reran: bool = False

    def lines(self) -> list[str]:
        out = [f"occupancy trials={self.trials} cells={len(self.cells)} outside={self.outside} "
               f"flagged={len(self.flagged)} reran={int(self.reran)} pass={int(self.passed)}"]
        for t, s, p, q, z in self.cells:
            out.append(f"cell t={t} sigma={s} p_hat={p:.6f} pi_tilde={q:.6f} z={z:.3f}")
        return out


def _occupancy_once(instance, epsilon, trials, rng) -> OccupancyReport:
    res = simulate_batch(instance, epsilon, trials, rng)
    cells, outside, flagged = [], 0, []
    # no rows at all when the search never leaves the prologue
    times = list(res.core_times) + [len(instance.kills)] if len(res.pi_tilde) else []
    for row, t in enumerate(times):
        for s in range(res.d):
            q = float(res.pi_tilde[row, s])
            p = float(res.occupancy[row, s]) / trials
            se = math.sqrt(max(q * (1 - q), 0.0) / trials)
            diff = p - q
            z = diff / se if se > 0 else (0.0 if abs(diff) <= SLACK else math.copysign(math.inf, diff))
            if abs(diff) > band(q, trials):
                outside += 1
            if abs(z) > 4:
                flagged.append((t, s))
            cells.append((t, s, p, q, z))
    allowed = int(OCCUPANCY_ALLOWED * len(cells))
    return OccupancyReport(trials, cells, outside, flagged, outside <= allowed)


def estimate_occupancy(instance: SearchInstance, epsilon: float, trials: int,
                       rng: np.random.Generator, rerun: bool = True) -> OccupancyReport:
    """Empirical law of the committed expert against its analytic value, at
    every core decommissioning and at the end."""
    if trials < 1000:
        raise ValueError("occupancy estimates need at least 1000 trials")
    rep = _occupancy_once(instance, epsilon, trials, rng)
    if not rep.passed and rerun:
        rep = _occupancy_once(instance, epsilon, 4 * trials, rng)
        rep.reran = True
    return rep


# -- jumps -------------------------------------------------------------------------

@dataclass
class JumpReport:
    H: int
    d: int
    epsilon: float
    trials: int
    prologue_jumps: int
    mean_core: float
    stderr: float
    expected_core: float
    bound: float
    passed: bool

    def lines(self) -> list[str]:
        return [f"jumps H={self.H} d={self.d} epsilon={self.epsilon:.6g} trials={self.trials} "
                f"prologue={self.prologue_jumps} mean_core={self.mean_core:.6f} "
                f"stderr={self.stderr:.6f} expected_core={self.expected_core:.6f} "
                f"bound={self.bound:.6f} pass={int(self.passed)}"]


def jump_bound(H: int, d: int, epsilon: float) -> float:
    return (1 + epsilon) * H + math.log(d) / epsilon


def check_jump_bound(instance: SearchInstance, epsilon: float, trials: int,
                     rng: np.random.Generator) -> JumpReport:
    res = simulate_batch(instance, epsilon, trials, rng)
    jumps = res.core_jumps.astype(float)
    mean = float(jumps.mean())
    se = float(jumps.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    bound = jump_bound(res.H, res.d, epsilon)
    ok = res.prologue_jumps <= res.H and mean <= bound + SIGMAS * se
    return JumpReport(res.H, res.d, epsilon, trials, res.prologue_jumps, mean, se,
                      res.expected_core_jumps, bound, ok)


# -- monotonicity ------------------------------------------------------------------

@dataclass
class MonotonicityReport:
    exact: bool
    trials: int
    triples: int
    violations: list = field(default_factory=list)   # (u, v, s, p_u, p_v)
    passed: bool = True
    reran: bool = False

    def lines(self) -> list[str]:
        out = [f"monotone exact={int(self.exact)} trials={self.trials} triples={self.triples} "
               f"violations={len(self.violations)} reran={int(self.reran)} pass={int(self.passed)}"]
        for u, v, s, pu, pv in self.violations:
            out.append(f"violation u={u} v={v} s={s} p_u={pu:.6f} p_v={pv:.6f}")
        return out


def _triples(tree: WeightedTree, targets):
    for s in targets:
        for u in range(tree.n):
            for v in tree.path(u, s)[1:]:
                yield u, v, s


def _laws(algorithm, tree, vertices, trials, rng, exact):
    laws = {}
    for u in vertices:
        if exact:
            laws[u] = dict(algorithm.response_law(u))
        else:
            counts: dict[int, int] = {}
            for _ in range(trials):
                s = _decided_server(algorithm, u, rng)
                counts[s] = counts.get(s, 0) + 1
            laws[u] = {s: c / trials for s, c in counts.items()}
    return laws


def _decided_server(algorithm, u, rng) -> int:
    out = algorithm.decide(u, rng)
    # TreeMatch returns a Decision, GroveMatch returns (vertex, plan)
    return out.server if hasattr(out, "server") else out[0]


def check_monotonicity(algorithm, tree: WeightedTree, rng: np.random.Generator | None = None,
                       trials: int = 0, exact: bool = True, tol: float = 1e-12,
                       rerun: bool = True) -> MonotonicityReport:
    """Check that moving the next request toward a free server never lowers
    the chance of getting it, for the algorithm in its current state.

    ``exact`` uses ``response_law``; otherwise every vertex is sampled
    ``trials`` times through ``decide`` and compared with 3-sigma bands.
    """
    targets = sorted({int(v) for v in np.flatnonzero(algorithm.count > 0)})
    laws = _laws(algorithm, tree, range(tree.n), trials, rng, exact)
    bad, checked = _scan(tree, targets, laws, trials, exact, tol)
    rep = MonotonicityReport(exact, trials, checked, bad, not bad)
    if bad and not exact and rerun:
        laws = _laws(algorithm, tree, range(tree.n), 4 * trials, rng, exact)
        bad, checked = _scan(tree, targets, laws, 4 * trials, exact, tol)
        rep = MonotonicityReport(exact, 4 * trials, checked, bad, not bad, reran=True)
    return rep


def _scan(tree, targets, laws, trials, exact, tol):
    bad, checked = [], 0
    for u, v, s in _triples(tree, targets):
        pu = laws[u].get(s, 0.0)
        pv = laws[v].get(s, 0.0)
        checked += 1
        if exact:
            limit = pv + tol
        else:
            se = math.sqrt(pu * (1 - pu) / trials) + math.sqrt(pv * (1 - pv) / trials)
            limit = pv + SIGMAS * se + SLACK
        if pu > limit:
            bad.append((u, v, s, pu, pv))
    return bad, checked


# -- grove distortion --------------------------------------------------------------

@dataclass
class DistortionReport:
    builds: int
    alpha: float
    Delta: float
    factor: float
    dominated: bool                     # d_G >= d_T on every pair of every build
    pairs: list[tuple[int, int, float, float, float]]   # (u, v, d_T, mean d_G, stderr)
    max_hops: int
    hop_bound: float
    passed: bool

    def lines(self) -> list[str]:
        out = [f"distortion builds={self.builds} alpha={self.alpha:.6g} Delta={self.Delta:.6g} "
               f"factor={self.factor:.6g} dominated={int(self.dominated)} max_hops={self.max_hops} "
               f"hop_bound={self.hop_bound:.6g} pass={int(self.passed)}"]
        for u, v, dt, m, se in self.pairs:
            out.append(f"pair u={u} v={v} d_T={dt:.6g} mean_d_G={m:.6g} stderr={se:.6g} "
                       f"ratio={m / dt:.6g}")
        return out


def distortion_factor(alpha: float, Delta: float) -> float:
    """Expected stretch allowance: ``alpha * (1 + log_alpha Delta)``."""
    L = math.log(Delta) / math.log(alpha) if Delta > 1 else 0.0
    return alpha * (1 + L)


def d_G_matrix(grove: GroveEmbedding) -> np.ndarray:
    tree = grove.tree
    stretched = WeightedTree(tree.n, [(u, v, grove.edge_length(u, v)) for u, v, _ in tree.edges],
                             tree.root)
    return stretched.distance_matrix


def check_distortion(tree: WeightedTree, alpha: float, builds: int, rng: np.random.Generator,
                     pairs=None, n_pairs: int = 20) -> DistortionReport:
    """Build ``builds`` groves; check domination exactly, the mean stretch of
    sampled pairs against ``alpha (1 + log_alpha Delta)``, and canopy hop counts."""
    n = tree.n
    if pairs is None:
        all_pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
        pick = rng.choice(len(all_pairs), size=min(n_pairs, len(all_pairs)), replace=False)
        pairs = [all_pairs[i] for i in sorted(pick)]
    D = tree.distance_matrix
    sums = np.zeros(len(pairs))
    sq = np.zeros(len(pairs))
    iu = np.array([p[0] for p in pairs], dtype=int)
    iv = np.array([p[1] for p in pairs], dtype=int)
    dominated = True
    max_hops = 0
    Delta = tree.eccentricity_from_root()
    for _ in range(builds):
        g = build_grove(tree, alpha, rng)
        dg = d_G_matrix(g)
        if (dg < D * (1 - 1e-12)).any():
            dominated = False
        x = dg[iu, iv]
        sums += x
        sq += x * x
        max_hops = max(max_hops, max(node.max_hops() for node in g.nodes()))
    mean = sums / builds
    var = np.maximum(sq / builds - mean ** 2, 0.0) * builds / max(builds - 1, 1)
    se = np.sqrt(var / builds)
    factor = distortion_factor(alpha, Delta)
    rows = [(int(u), int(v), float(D[u, v]), float(m), float(s))
            for u, v, m, s in zip(iu, iv, mean, se)]
    stretch_ok = all(m <= factor * dt + SIGMAS * s for _, _, dt, m, s in rows)
    hop_bound = alpha + 1
    return DistortionReport(builds, alpha, Delta, factor, dominated, rows, max_hops, hop_bound,
                            dominated and stretch_ok and max_hops <= hop_bound)


# -- partition marginals -----------------------------------------------------------

@dataclass
class MarginalSweep:
    cases: int
    partitions: int
    max_error: float
    min_margin: float
    passed: bool

    def lines(self) -> list[str]:
        return [f"marginals cases={self.cases} partitions={self.partitions} "
                f"max_error={self.max_error:.3e} min_margin={self.min_margin:.6g} "
                f"pass={int(self.passed)}"]


def sweep_marginals(cases, rng: np.random.Generator, tol: float = 1e-9,
                    margin_floor: float = 1e-12) -> MarginalSweep:
    """For each ``(tree, servers, pi)``: build the partition distribution,
    check its marginals, and check every partition's prices are incentive
    compatible with a margin above ``margin_floor``."""
    worst, parts, count, min_margin = 0.0, 0, 0, math.inf
    ok = True
    for tree, locs, pi in cases:
        count += 1
        dist = build_partition_distribution(tree, locs, pi)
        rep = verify_marginals(dist, pi, tol)
        worst = max(worst, rep.max_error)
        ok &= rep.passed
        for part, _ in dist.entries:
            parts += 1
            prices = price_partition(tree, locs, part)
            lead = part.leader_of(tree.n)
            for v in range(tree.n):
                if selfish_choice(tree, locs, prices, v) != lead[v]:
                    ok = False
                m = choice_margin(tree, locs, prices, v)
                min_margin = min(min_margin, m)
                if not m > margin_floor:
                    ok = False
    return MarginalSweep(count, parts, worst, min_margin, ok)

