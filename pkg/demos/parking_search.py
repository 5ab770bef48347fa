"""A car hunting for the last free parking spot on a tree.

Spots close one by one; the car never knows which spot will survive. We run
TreeSearch once with a visible trace, then many times to compare the law of
the committed expert against its closed form.
"""

import math

from parkmatch import SearchInstance, make_rng, run_tree_search, simulate_batch
from parkmatch.oracles import opt_search_cost
from parkmatch.tree_metric import WeightedTree
from parkmatch.verify import jump_bound

# root 0 with three streets of spots
edges = [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (0, 4, 2.0), (0, 5, 1.0), (5, 6, 3.0)]
tree = WeightedTree(7, edges)
spots = [1, 2, 3, 4, 5, 6]
inst = SearchInstance(tree, spots, start=0, kills=[4, 1, 6, 2, 5])
eps = 0.3

trace = run_tree_search(inst, eps, make_rng(2024))
for line in trace.lines():
    print(line)
print(f"offline cost {opt_search_cost(inst):g} (straight to spot {inst.survivor})")

batch = simulate_batch(inst, eps, 50_000, make_rng(2024, 1))
print(f"\ncommitted-expert law after each core kill (d={batch.d} experts)")
for row, t in enumerate(list(batch.core_times) + [len(inst.kills)]):
    emp = batch.occupancy[row] / batch.trials
    exact = batch.pi_tilde[row]
    print(f"  t={t}: " + "  ".join(f"{e:.3f}/{x:.3f}" for e, x in zip(emp, exact)))

print(f"\nmean core jumps {batch.core_jumps.mean():.3f}, exact {batch.expected_core_jumps:.3f}, "
      f"bound {jump_bound(batch.H, batch.d, eps):.3f} (ln d / eps = {math.log(batch.d) / eps:.3f})")
