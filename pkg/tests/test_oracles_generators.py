import math

import networkx as nx
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from parkmatch.generators import (all_tree_shapes, gen_match_instance, gen_random_tree,
                                  gen_search_instance, random_shape, shape_key, tree_delta)
from parkmatch.mw_search import SearchInstance
from parkmatch.oracles import brute_force_matching_cost, opt_matching_cost, opt_search_cost
from parkmatch.rng import make_rng
from parkmatch.tree_metric import WeightedTree

from conftest import trees


def test_opt_search_examples(path3):
    assert opt_search_cost(SearchInstance(path3, [2], 2, [])) == 0
    assert opt_search_cost(SearchInstance(path3, [0, 2], 0, [0])) == 3.0
    # survivor at the root
    assert opt_search_cost(SearchInstance(path3, [0, 1], 2, [1])) == 3.0


def test_opt_matching_examples():
    t = WeightedTree(3, [(0, 1, 3.0), (0, 2, 5.0)])
    assert opt_matching_cost(t, [1, 2], [0]) == 3.0
    assert opt_matching_cost(t, [1, 1, 2], [1, 1, 2]) == 0.0
    assert opt_matching_cost(t, [0], []) == 0.0
    # crossing pairs on a path: a-b-c-d, servers at a, d, requests at b, c
    p = WeightedTree(4, [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)])
    assert opt_matching_cost(p, [0, 3], [1, 2]) == brute_force_matching_cost(p, [0, 3], [1, 2]) == 2.0
    with pytest.raises(ValueError):
        opt_matching_cost(t, [0], [1, 2])


@given(trees(min_n=1, max_n=8), st.integers(1, 6), st.data())
def test_assignment_matches_brute_force(tree, k, data):
    g = make_rng(data.draw(st.integers(0, 2 ** 32)))
    m = data.draw(st.integers(0, k))
    servers, requests = gen_match_instance(tree, k, m, g)
    assert opt_matching_cost(tree, servers, requests) == pytest.approx(
        brute_force_matching_cost(tree, servers, requests), abs=1e-9)


def test_tiny_generators():
    g = make_rng(0)
    one = gen_random_tree(1, g)
    assert one.n == 1 and len(one.edges) == 0
    two = gen_random_tree(2, g, Delta_target=50)
    assert two.n == 2 and len(two.edges) == 1 and two.edges[0][2] == 1.0
    with pytest.raises(ValueError):
        gen_random_tree(0, g)
    with pytest.raises(ValueError):
        gen_random_tree(3, g, weight_law="cauchy")


def test_pruefer_covers_all_shapes():
    g = make_rng(1)
    for n in range(1, 8):
        want = {shape_key(t) for t in all_tree_shapes(n)}
        got = set()
        for _ in range(40_000):
            got.add(shape_key(WeightedTree(n, [(a, b, 1.0) for a, b in random_shape(n, g)], 0)))
            if got == want:
                break
        assert got == want, n


def test_pruefer_round_trip_n8():
    # the star on 8 vertices has probability 8 / 8**6, so check the bijection instead
    for t in all_tree_shapes(8):
        g = nx.Graph([(a, b) for a, b, _ in t.edges])
        back = nx.from_prufer_sequence(nx.to_prufer_sequence(g))
        assert nx.is_isomorphic(g, back)


def test_shape_counts():
    # OEIS A000055
    assert [len(all_tree_shapes(n)) for n in range(1, 9)] == [1, 1, 1, 2, 3, 6, 11, 23]


@pytest.mark.parametrize("law", ["unit", "uniform", "loguniform"])
@given(st.integers(1, 40), st.integers(0, 2 ** 32))
def test_generated_trees_are_normalised(law, n, seed):
    tree = gen_random_tree(n, make_rng(seed), law, Delta_target=128.0)
    assert tree.n == n and tree.root == 0
    if n > 1:
        assert tree.min_edge_weight() == pytest.approx(1.0)


@given(st.integers(3, 40), st.sampled_from([4.0, 64.0, 256.0]), st.integers(0, 2 ** 32))
def test_generator_hits_declared_delta(n, Delta, seed):
    tree = gen_random_tree(n, make_rng(seed), Delta_target=Delta)
    hops = max(len(tree.path(tree.root, v)) - 1 for v in range(n))
    if hops <= Delta:
        assert Delta / 2 <= tree_delta(tree) <= 2 * Delta
    else:
        # every weight is at least 1, so a deep shape overshoots; it stays unit weight
        assert tree_delta(tree) == hops


@given(trees(min_n=1, max_n=15), st.integers(0, 2 ** 32), st.booleans())
def test_search_instances(tree, seed, distinct):
    inst = gen_search_instance(tree, make_rng(seed), distinct=distinct)
    assert len(inst.kills) == len(inst.spots) - 1
    assert set(inst.kills) < set(inst.spots)
    if distinct and tree.n > 1:
        assert inst.start != inst.survivor
        assert opt_search_cost(inst) > 0


def test_kill_orders_are_shuffled():
    tree = WeightedTree(4, [(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0)])
    g = make_rng(5)
    survivors = [gen_search_instance(tree, g, n_spots=4).survivor for _ in range(4000)]
    counts = np.bincount(survivors, minlength=4)
    assert all(abs(c - 1000) < 4 * math.sqrt(750) for c in counts)


def test_match_instances():
    g = make_rng(2)
    tree = gen_random_tree(10, g)
    servers, requests = gen_match_instance(tree, 6, 4, g)
    assert servers == sorted(servers) and len(servers) == 6 and len(requests) == 4
    with pytest.raises(ValueError):
        gen_match_instance(tree, 2, 3, g)
