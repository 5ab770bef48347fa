"""End-to-end competitive-ratio experiments for GroveMatch on search instances."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .generators import gen_random_tree, gen_search_instance
from .grove import build_grove, grove_parameters, GroveMatch
from .match_mono import search_as_matching
from .mw_search import SearchInstance
from .oracles import opt_search_cost
from .rng import make_rng


def competitive_bound(alpha: float, Delta: float) -> float:
    """Explicit-constant bound on E[cost] / OPT for GroveMatch on a search
    instance: the per-level prologue (3 e^5 alpha L^2) and core (2 e^4 L)
    allowances under the grove metric, times the expected stretch
    ``alpha (1 + L)`` of that metric, with ``L = max(1, log_alpha Delta)``."""
    L = max(1.0, math.log(Delta) / math.log(alpha)) if Delta > 1 else 1.0
    in_grove = 3 * math.e ** 5 * alpha * L ** 2 + 2 * math.e ** 4 * L
    return in_grove * alpha * (1 + L)


@dataclass
class ExperimentConfig:
    seed: int
    trials: int = 20
    instances: int = 20
    n: int = 40
    Delta: float = 256.0
    alpha: float | None = None
    epsilon: float | None = None
    source: list[SearchInstance] | None = None   # fixed instances instead of generated ones

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.seed is None:
            raise ValueError("an explicit seed is required")


@dataclass
class InstanceResult:
    index: int
    n: int
    Delta: float
    alpha: float
    epsilon: float
    opt: float
    costs: np.ndarray = field(repr=False)
    bound: float = 0.0

    @property
    def mean(self) -> float:
        return float(self.costs.mean())

    @property
    def ratio(self) -> float:
        return self.mean / self.opt


@dataclass
class RatioReport:
    instances: list[InstanceResult]
    skipped: int

    @property
    def ratios(self) -> np.ndarray:
        return np.array([r.ratio for r in self.instances])

    @property
    def passed(self) -> bool:
        return bool(self.instances) and all(
            math.isfinite(r.ratio) and r.ratio <= r.bound for r in self.instances)

    def lines(self) -> list[str]:
        out = []
        for r in self.instances:
            out.append(f"instance {r.index} n={r.n} Delta={r.Delta:.6g} alpha={r.alpha:.6g} "
                       f"epsilon={r.epsilon:.6g} opt={r.opt:.6g} cost_mean={r.mean:.6g} "
                       f"cost_std={r.costs.std():.6g} cost_max={r.costs.max():.6g} "
                       f"ratio={r.ratio:.6g} bound={r.bound:.6g}")
        rs = self.ratios
        if len(rs):
            out.append(f"summary instances={len(rs)} skipped={self.skipped} "
                       f"ratio_mean={rs.mean():.6g} ratio_std={rs.std():.6g} ratio_max={rs.max():.6g} "
                       f"bound_min={min(r.bound for r in self.instances):.6g} pass={int(self.passed)}")
        else:
            out.append(f"summary instances=0 skipped={self.skipped} pass=0")
        return out


def grove_match_cost(instance: SearchInstance, alpha: float, epsilon: float,
                     rng: np.random.Generator) -> float:
    """One run: fresh grove, then the search replayed as matching requests."""
    grove = build_grove(instance.tree, alpha, rng)
    servers, requests = search_as_matching(instance)
    gm = GroveMatch(grove, servers, epsilon)
    for v in requests:
        gm.serve(v, rng)
    return gm.total_cost


def run_experiment(config: ExperimentConfig) -> RatioReport:
    """Mean GroveMatch cost over ``trials`` runs per instance against the
    offline optimum. Instances whose optimum is 0 are skipped (and counted)."""
    if config.source is not None:
        instances = list(config.source)
    else:
        instances = []
        for i in range(config.instances):
            g = make_rng(config.seed, 0, i)
            n = int(g.integers(2, config.n + 1))
            tree = gen_random_tree(n, g, Delta_target=config.Delta)
            instances.append(gen_search_instance(tree, g, distinct=True))
    results, skipped = [], 0
    for i, inst in enumerate(instances):
        opt = opt_search_cost(inst)
        if opt <= 0:
            skipped += 1
            continue
        alpha, eps = grove_parameters(inst.tree, config.alpha, config.epsilon)
        Delta = inst.tree.eccentricity_from_root()
        costs = np.array([grove_match_cost(inst, alpha, eps, make_rng(config.seed, 1, i, t))
                          for t in range(config.trials)])
        results.append(InstanceResult(i, inst.tree.n, Delta, alpha, eps, opt, costs,
                                      competitive_bound(alpha, Delta)))
    return RatioReport(results, skipped)
