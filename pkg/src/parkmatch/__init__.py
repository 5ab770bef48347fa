"""Online matching and search on tree metrics, with posted-price compilation."""

from .experiment import ExperimentConfig, RatioReport, competitive_bound, run_experiment
from .generators import gen_match_instance, gen_random_tree, gen_search_instance
from .grove import (GroveEmbedding, GroveMatch, build_grove, d_G, edge_depth, grove_parameters,
                    run_grove_match, solve_alpha)
from .match_mono import TreeMatch, run_tree_match, search_as_matching
from .mw_search import (SearchInstance, TreeSearch, build_expert_index, q_distribution,
                        run_tree_search, simulate_batch)
from .oracles import opt_matching_cost, opt_search_cost
from .pricing import (MonotonePartition, PartitionDistribution, build_partition_distribution,
                      price_partition, price_step_for_algorithm, prices_induce_monotone,
                      selfish_choice, verify_marginals)
from .rng import make_rng
from .tree_metric import WeightedTree

__version__ = "0.1.0"
