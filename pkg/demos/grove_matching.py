"""Online matching on a random tree through a grove.

Builds one grove, shows its top canopy, then serves a stream of requests
with GroveMatch and compares against the offline assignment optimum.
"""

from parkmatch import make_rng
from parkmatch.generators import gen_match_instance, gen_random_tree
from parkmatch.grove import build_grove, grove_parameters, run_grove_match
from parkmatch.oracles import opt_matching_cost

rng = make_rng(7)
tree = gen_random_tree(25, rng, Delta_target=128.0)
alpha, eps = grove_parameters(tree)
print(f"n={tree.n} Delta={tree.eccentricity_from_root():.1f} alpha={alpha:.3f} epsilon={eps:.3f}")

grove = build_grove(tree, alpha, rng)
top = grove.dump()
print("\n".join(top[:8]) + ("\n  ..." if len(top) > 8 else ""))

servers, requests = gen_match_instance(tree, 12, 10, rng)
costs = []
for trial in range(200):
    res = run_grove_match(tree, servers, requests, make_rng(7, trial), alpha, eps)
    costs.append(res.total_cost)
opt = opt_matching_cost(tree, servers, requests)
mean = sum(costs) / len(costs)
print(f"\nGroveMatch mean cost {mean:.2f} over {len(costs)} runs, offline optimum {opt:.2f}, "
      f"ratio {mean / opt:.2f}")

res = run_grove_match(tree, servers, requests, make_rng(7, 0), alpha, eps)
print("\nwhere one run spent its distance (depth, canopy, phase):")
for (depth, uid), slot in sorted(res.charges.items()):
    for label, c in sorted(slot.items()):
        if c > 0:
            print(f"  depth={depth} canopy={uid} {label}: {c:.2f}")
