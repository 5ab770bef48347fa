import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from parkmatch.generators import gen_match_instance, gen_random_tree, gen_search_instance
from parkmatch.match_mono import (COLOCATED, FALLBACK, SHADOWING, CapacityError, TreeMatch,
                                  run_tree_match, search_as_matching, server_counts)
from parkmatch.mw_search import CORE, TreeSearch, build_expert_index, run_tree_search
from parkmatch.rng import make_rng
from parkmatch.tree_metric import WeightedTree
from parkmatch.verify import check_monotonicity


def chain(n, w=1.0):
    return WeightedTree(n, [(i, i + 1, w) for i in range(n - 1)])


def shadowing_at(tree, servers, car):
    """A matcher forced into shadowing with the car parked at ``car``."""
    tm = TreeMatch(tree, servers, 0.5)
    tm.mode = SHADOWING
    tm.shadow = tm._fresh_search()
    tm.shadow.car = car
    return tm


def test_server_counts():
    assert list(server_counts(3, [0, 2, 2])) == [1, 0, 2]
    assert list(server_counts(3, {1: 3})) == [0, 3, 0]
    with pytest.raises(ValueError):
        server_counts(3, [5])


def test_neighbor_sets_both_sides():
    tm = shadowing_at(chain(3), [0, 2], car=1)
    assert tm.neighbor_sets() == ([0, 2], [1], [])


def test_neighbor_sets_blocked():
    # s1=0, s2=1, car=2: s2 hides s1
    tm = shadowing_at(chain(3), [0, 1], car=2)
    assert tm.neighbor_sets() == ([1], [2], [0])


def test_neighbor_sets_empty():
    tm = shadowing_at(chain(3), [0], car=2)
    tm.count[:] = 0
    Q, R, X = tm.neighbor_sets()
    assert Q == [] and R == [0, 1, 2] and X == []


def test_neighbor_sets_need_shadowing():
    with pytest.raises(RuntimeError):
        TreeMatch(chain(3), [0], 0.5).neighbor_sets()


def test_colocated_costs_nothing():
    res = run_tree_match(chain(4), [0, 1, 3], [3, 0, 1], 0.5, make_rng(0))
    assert res.total_cost == 0
    assert [a.server for a in res.assignments] == [3, 0, 1]


def test_deviation_behind_blocker_goes_toward_car():
    # path 0-1-2-3, free server at 1, car parked at 3 (its server already used):
    # 1 blocks 0 from the car, so a request at 0 deviates and takes 1
    tm = shadowing_at(chain(4), [1, 3], car=3)
    tm.count[3] = 0
    assert tm.neighbor_sets() == ([1], [2, 3], [0])
    assert tm.response_law(0) == {1: 1.0}
    assert tm.serve(0, make_rng(0)) == 1
    assert tm.mode == FALLBACK


def test_greedy_after_deviation():
    tree = chain(5)
    tm = TreeMatch(tree, [0, 2, 4], 0.5)
    tm.mode = FALLBACK
    assert tm.serve(1, make_rng(0)) == 0       # tie between 0 and 2 goes to the smaller id
    assert tm.serve(3, make_rng(0)) == 2       # tie between 2 and 4 again
    assert tm.serve(0, make_rng(0)) == 4


def test_capacity():
    tm = TreeMatch(chain(2), [0], 0.5)
    tm.serve(1, make_rng(0))
    with pytest.raises(CapacityError):
        tm.serve(1, make_rng(0))
    with pytest.raises(CapacityError):
        run_tree_match(chain(2), [0], [0, 1], 0.5, make_rng(0))


@st.composite
def search_cases(draw, max_n=14):
    seed = draw(st.integers(0, 2 ** 32))
    g = make_rng(seed)
    n = draw(st.integers(1, max_n))
    tree = gen_random_tree(n, g, Delta_target=32)
    return gen_search_instance(tree, g), seed


@given(search_cases(), st.sampled_from([0.2, 0.5]))
def test_promise_instances_replay_the_search(case, eps):
    inst, seed = case
    tr = run_tree_search(inst, eps, make_rng(seed, 1))
    servers, requests = search_as_matching(inst)
    res = run_tree_match(inst.tree, servers, requests, eps, make_rng(seed, 1))
    # paired seeds: the matching follows the car step for step
    cars = [tr.placement_car] + [s.car for s in tr.steps]
    jumped = [tr.placement_moved] + [s.jumped for s in tr.steps]
    for a, car, moved in zip(res.assignments, cars, jumped):
        if moved:
            assert a.server == car
        else:
            assert a.cost == 0
    assert res.total_cost == pytest.approx(tr.total_distance)


@st.composite
def match_states(draw, max_n=10):
    seed = draw(st.integers(0, 2 ** 32))
    g = make_rng(seed)
    n = draw(st.integers(1, max_n))
    tree = gen_random_tree(n, g, Delta_target=16)
    k = draw(st.integers(1, n + 2))
    m = draw(st.integers(0, k - 1))
    servers, requests = gen_match_instance(tree, k, m, g)
    if draw(st.booleans()):
        # search-like histories keep the matcher in shadowing longer
        inst = gen_search_instance(tree, g)
        servers, requests = search_as_matching(inst)
        requests = requests[:draw(st.integers(0, len(requests) - 1))]
    tm = TreeMatch(tree, servers, draw(st.sampled_from([0.2, 0.5, 0.8])))
    for v in requests:
        tm.serve(v, g)
    return tm, g


@given(match_states())
def test_response_law_is_a_distribution(state):
    tm, _ = state
    for v in range(tm.tree.n):
        law = tm.response_law(v)
        assert abs(sum(law.values()) - 1) <= 1e-12
        assert all(p > 0 for p in law.values())
        assert all(tm.count[s] > 0 for s in law)


@given(match_states())
def test_exact_monotonicity(state):
    tm, _ = state
    rep = check_monotonicity(tm, tm.tree)
    assert rep.passed, rep.violations


@given(match_states())
def test_shadow_tracks_free_servers(state):
    tm, g = state
    assert tm.shadow_consistent()
    assert (tm.count >= 0).all()
    assert tm.remaining == tm.initial.sum() - len(tm.assignments)


def test_decide_follows_response_law():
    g = make_rng(5)
    tree = gen_random_tree(9, g, Delta_target=16)
    inst = gen_search_instance(tree, g, n_spots=7)
    servers, requests = search_as_matching(inst)
    tm = TreeMatch(tree, servers, 0.4)
    for v in requests[:3]:
        tm.serve(v, g)
    N = 20_000
    for u in range(tree.n):
        law = tm.response_law(u)
        counts = {}
        for _ in range(N):
            s = tm.decide(u, g).server
            counts[s] = counts.get(s, 0) + 1
        for s in set(law) | set(counts):
            p, p_hat = law.get(s, 0.0), counts.get(s, 0) / N
            assert abs(p_hat - p) <= 3 * np.sqrt(p * (1 - p) / N) + 1e-6


@given(search_cases(max_n=16), st.integers(0, 50))
def test_neighbor_property(case, seed):
    """Every destination the car may jump to is visible from it: no live
    spot sits strictly in between."""
    inst, _ = case
    idx = build_expert_index(inst.tree, inst.spots)
    s = TreeSearch(inst.tree, idx, 0.3)
    rng = make_rng(seed)
    s.place(inst.start, rng)
    for r in inst.kills:
        if r == s.car and s.alive.sum() > 1:
            for _, dest, p in s.move_options():
                inner = inst.tree.path(s.car, dest)[1:-1]
                assert p > 0 and not s.alive[inner].any()
        s.decommission(r, rng)
