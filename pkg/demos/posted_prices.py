"""Turning a randomized matching rule into posted prices.

TreeMatch's exact one-step law is compiled into a distribution over monotone
partitions. Drawing a partition and pricing it makes selfish drivers, who
minimise distance plus price, reproduce that law.
"""

import numpy as np

from parkmatch import make_rng
from parkmatch.generators import gen_random_tree
from parkmatch.match_mono import TreeMatch
from parkmatch.pricing import (build_partition_distribution, price_partition, selfish_choice,
                               step_law, verify_marginals)

rng = make_rng(11)
tree = gen_random_tree(8, rng, Delta_target=16.0)
tm = TreeMatch(tree, [0, 2, 2, 5, 7], 0.4)
tm.serve(4, rng)

locs, pi = step_law(tm)
dist = build_partition_distribution(tree, locs, pi)
print(f"free servers at {locs}; {len(dist.entries)} monotone partitions, "
      f"marginal error {verify_marginals(dist, pi).max_error:.1e}")
for part, p in dist.entries[:3]:
    prices = price_partition(tree, locs, part)
    print("\n".join(part.lines(p)))
    print("  prices", " ".join("inf" if not np.isfinite(x) else f"{x:.2f}" for x in prices))

draws = 20_000
hits = np.zeros_like(pi)
for _ in range(draws):
    part = dist.sample(rng)
    prices = price_partition(tree, locs, part)
    for v in range(tree.n):
        hits[selfish_choice(tree, locs, prices, v), v] += 1
print(f"\nlargest gap between selfish choices and the law over {draws} draws: "
      f"{np.abs(hits / draws - pi).max():.4f}")
