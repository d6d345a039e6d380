import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aptsp.algorithms import (AprioriConfig, BudgetExceeded, NormalizationError,
                              NormalizationPlan, SamplingPolicy, best_depot_tour,
                              build_master_route_tour, copy_count, low_activity_cap,
                              normalize_instance, run_sampling_algorithm, sample_master_set,
                              solve_apriori, solve_apriori_traced, solve_low_activity)
from aptsp.derand import (LP_ALPHA, conditional_connection_cost, derandomized_master_route,
                          derandomized_master_route_traced, pessimistic_estimator,
                          solve_master_route_lp)
from aptsp.evaluation import (expected_cost_bruteforce, expected_tour_cost_exact,
                              mr_cost_exact, optimal_apriori_bruteforce)
from aptsp.instance import Instance, dist_to_set
from aptsp.tsp import held_karp, subtour_lp_value

from conftest import random_instance


# -- policies and sampling ---------------------------------------------------------

def test_policy_parse_and_format():
    assert SamplingPolicy.parse("identity") == SamplingPolicy("identity", 1.0)
    assert SamplingPolicy.parse("power:0.5") == SamplingPolicy("power", 0.5)
    assert SamplingPolicy.parse("scaled") == SamplingPolicy("scaled", 0.663)
    assert str(SamplingPolicy.parse("power:0.663")) == "power:0.663"
    for bad in ("identity:0.3", "cubic:0.5", "power:1.5", "scaled:0"):
        with pytest.raises(ValueError):
            SamplingPolicy.parse(bad)


@settings(max_examples=100, deadline=None)
@given(st.sampled_from(["identity", "power", "scaled"]),
       st.floats(1e-3, 1.0), st.lists(st.floats(0.0, 1.0), min_size=1, max_size=20))
def test_policy_is_a_probability_with_f1_equal_1(kind, sigma, ps):
    f = SamplingPolicy(kind, sigma)
    vals = f(np.array(ps))
    assert np.all((vals >= 0) & (vals <= 1))
    assert f(np.array([1.0]))[0] == 1.0


def test_power_inclusion_frequency():
    inst = Instance.uniform(1001, 0.5).make_depot(0)
    policy = SamplingPolicy("power", 0.663)
    hits = sum(len(sample_master_set(inst, policy, seed)) - 1 for seed in range(1000))
    target = 1 - 0.5**0.663
    assert target == pytest.approx(0.3686, abs=2e-4)
    freq = hits / 1_000_000
    assert abs(freq - target) <= 4 * math.sqrt(target * (1 - target) / 1_000_000)


def test_scaled_policy_mean_size():
    inst = Instance.uniform(201, 0.4).make_depot(0)
    policy = SamplingPolicy("scaled", 0.5)
    draws = 2000
    mean = np.mean([len(sample_master_set(inst, policy, s)) - 1 for s in range(draws)])
    expected = 0.5 * 0.4 * 200
    sd = math.sqrt(200 * 0.2 * 0.8 / draws)
    assert abs(mean - expected) <= 4 * sd


def test_sampling_is_deterministic_and_keeps_depot(rng):
    inst = random_instance(rng, 9, depot=3)
    policy = SamplingPolicy()
    assert sample_master_set(inst, policy, 42) == sample_master_set(inst, policy, 42)
    assert all(3 in sample_master_set(inst, policy, s) for s in range(50))
    full = inst.with_probabilities(np.ones(9), depot=3)
    assert sample_master_set(full, SamplingPolicy("scaled", 0.1), 7) == frozenset(range(9))
    with pytest.raises(ValueError):
        sample_master_set(random_instance(rng, 5, depot=None), policy, 0)


# -- master route tours ------------------------------------------------------------

def test_full_master_set_is_the_tsp_tour(rng):
    inst = random_instance(rng, 8)
    tour, sol = build_master_route_tour(inst, range(8))
    assert tour == held_karp(inst).tour
    assert sol.hub == {}


def _adjacent_runs(order, hub, pendants):
    i = order.index(hub)
    return set(order[i + 1:i + 1 + len(pendants)]) == set(pendants)


def test_pendants_follow_their_hub():
    # five master customers on a pentagon, six pendants close to them
    angles = np.linspace(0, 2 * np.pi, 5, endpoint=False)
    hubs = np.c_[np.cos(angles), np.sin(angles)] * 10
    pend = np.array([hubs[0] + [0.5, 0], hubs[0] + [0, 0.7], hubs[1] + [0.3, 0.3],
                     hubs[2] + [-0.4, 0], hubs[3] + [0, -0.2], hubs[4] + [0.6, 0.1]])
    inst = Instance.from_points(np.vstack([hubs, pend]), np.full(11, 0.5), depot=0)
    tour, sol = build_master_route_tour(inst, range(5))
    order = list(tour.order)
    attached = {h: [v for v, g in sol.hub.items() if g == h] for h in range(5)}
    assert sorted(len(a) for a in attached.values()) == [1, 1, 1, 1, 2]
    for h, pendants in attached.items():
        assert _adjacent_runs(order, h, pendants)
    # nearest first at the shared hub
    i = order.index(0)
    assert order[i + 1] == 5


@pytest.mark.parametrize("seed", range(20))
def test_emitted_tour_is_no_worse_than_master_route_cost(seed):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, 10)
    s = {0} | set(rng.choice(np.arange(1, 10), size=int(rng.integers(0, 9)), replace=False).tolist())
    tour, sol = build_master_route_tour(inst, s)
    assert expected_tour_cost_exact(inst, tour) <= mr_cost_exact(inst, s, sol.master_cost) + 1e-9


def test_sampling_with_all_active_customers(rng):
    inst = random_instance(rng, 7).with_probabilities(np.ones(7), depot=0)
    for kind in ("exact", "christofides"):
        tour = run_sampling_algorithm(inst, SamplingPolicy(), kind, seed=1)
        assert expected_tour_cost_exact(inst, tour) <= (1.5 if kind != "exact" else 1.0) * \
            held_karp(inst).cost + 1e-9


# -- low activity, depot choice, dispatch ------------------------------------------

def _best_master_route_tour(inst, n_max):
    best = math.inf
    for k in range(2, n_max + 1):
        for s in itertools.combinations(range(inst.n), k):
            tour, _ = build_master_route_tour(inst, s)
            best = min(best, expected_tour_cost_exact(inst, tour))
    return best


def test_low_activity_full_enumeration(rng):
    inst = random_instance(rng, 6, depot=None)
    tour, s, cost = solve_low_activity(inst, 6)
    assert cost == pytest.approx(_best_master_route_tour(inst, 6), rel=1e-12)
    assert cost == pytest.approx(expected_tour_cost_exact(inst, tour), rel=1e-12)
    assert solve_low_activity(inst, 50)[2] == cost


def test_low_activity_uniform_tiny_p_pairs():
    inst = Instance.uniform(8, 0.01)
    tour, s, cost = solve_low_activity(inst, 2)
    assert len(s) == 2
    assert cost <= 3 * optimal_apriori_bruteforce(inst)[1] + 1e-12


def test_low_activity_budget():
    with pytest.raises(BudgetExceeded):
        solve_low_activity(Instance.uniform(60, 0.01), 30)


def test_low_activity_cap_formula():
    assert low_activity_cap(0.5, 0.5) == math.ceil(1.0 + 16)
    assert low_activity_cap(10.0, 1.0) == math.ceil(20 + math.ceil(20 * math.e))
    assert low_activity_cap(0.0, 4.0) == 2


@pytest.mark.parametrize("seed", range(4))
def test_best_depot_is_the_argmin(seed):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, 8, depot=None)
    inner = lambda i: run_sampling_algorithm(i, SamplingPolicy(), "exact", seed)  # noqa: E731
    tour, v, costs = best_depot_tour(inst, inner)
    assert costs[v] == min(costs)
    assert expected_tour_cost_exact(inst, tour) == pytest.approx(costs[v])
    brute = [expected_cost_bruteforce(inst, inner(inst.make_depot(u))) for u in range(8)]
    assert int(np.argmin(brute)) == v
    assert best_depot_tour(inst, inner, threads=4)[:2] == (tour, v)


def test_dispatch_branches(rng):
    depot_inst = random_instance(rng, 6)
    assert solve_apriori_traced(depot_inst, 0.5)[1]["branch"] == "depot"
    low = Instance.uniform(5, 0.1)
    tour, info = solve_apriori_traced(low, 0.5)
    assert info["branch"] == "low-activity" and info["threshold"] == pytest.approx(12.4)
    assert sorted(tour.order) == list(range(5))
    with pytest.raises(ValueError):
        solve_apriori(low, 0.0)


def test_high_activity_branch_meets_guarantee(rng):
    inst = random_instance(rng, 8, depot=None, p_low=0.9, p_high=0.9)
    opt = optimal_apriori_bruteforce(inst)[1]
    # total activity is 7.2, so epsilon must exceed 2 * rho / 7.2 to reach this branch
    for algorithm, rho, eps in (("sampling", 3.1, 0.9), ("derand", 5.9, 1.7)):
        tour, info = solve_apriori_traced(inst, eps, AprioriConfig(algorithm=algorithm))
        assert info["branch"] == "best-depot"
        assert info["threshold"] == pytest.approx(2 * rho / eps)
        envelope = 3.1 if algorithm == "sampling" else 6.5
        assert expected_tour_cost_exact(inst, tour) <= (envelope + eps) * opt + 1e-9


# -- normalization -----------------------------------------------------------------

def test_copy_counts():
    assert copy_count(0.3, 0.3, 1.0, 0.663) == 1
    assert copy_count(0.5, 0.01, 1.0, 0.663) == 68
    assert copy_count(0.5, 0.01, 1.0, 0.663) == math.floor(math.log(0.5) / math.log(0.99))
    assert copy_count(1.0, 0.25, 1.0, 0.663) == max(4, math.ceil(math.log(0.5) / math.log(1 - 0.663 * 0.25)))


def test_condition_one_at_half():
    plan = NormalizationPlan(0.01, 1.0, 0.663, {}, ())
    assert 1 - 0.99**68 == pytest.approx(0.4948, abs=5e-4)
    assert plan.conditions(0.5, 68)[0]


def test_identity_normalization():
    inst = Instance.uniform(5, 0.3).make_depot(0)
    norm, plan = normalize_instance(inst, 0.3, 1.0)
    assert plan.copies == {1: 1, 2: 1, 3: 1, 4: 1}
    assert norm.n == 5 and np.array_equal(norm.dist, inst.dist)
    assert np.allclose(norm.p, inst.p)


def test_normalized_instance_shape(rng):
    inst = random_instance(rng, 4, p_low=0.55, p_high=0.6)
    norm, plan = normalize_instance(inst, 0.3, 1.0)
    assert all(k == 2 for k in plan.copies.values())
    assert norm.n == 1 + 2 * 3 and norm.depot == 0
    assert np.all(norm.p[1:] == 0.3)
    for i, j in itertools.combinations(range(norm.n), 2):
        assert norm.dist[i, j] == inst.dist[plan.projection[i], plan.projection[j]]
    for v, k in plan.copies.items():
        assert all(plan.conditions(float(inst.p[v]), k))


def test_normalization_rejects_large_epsilon():
    inst = Instance.uniform(4, 0.39).make_depot(0)
    with pytest.raises(NormalizationError):
        normalize_instance(inst, 0.3, 1.0)
    with pytest.raises(ValueError):
        normalize_instance(inst, 1.5, 1.0)
    with pytest.raises(ValueError):
        normalize_instance(Instance.uniform(3, 0.3), 0.1, 1.0)


# -- deterministic algorithm -------------------------------------------------------

def _conditional_oracle(inst, included, excluded):
    free = [v for v in range(inst.n) if v not in included and v not in excluded]
    total = 0.0
    for bits in itertools.product((0, 1), repeat=len(free)):
        s = set(included) | {v for v, b in zip(free, bits) if b}
        prob = math.prod(inst.p[v] if b else 1 - inst.p[v] for v, b in zip(free, bits))
        total += prob * sum(2 * inst.p[v] * dist_to_set(inst, v, s) for v in range(inst.n))
    return total


@pytest.mark.parametrize("seed", range(8))
def test_conditional_connection_cost_matches_enumeration(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(4, 11))
    inst = random_instance(rng, n)
    assert conditional_connection_cost(inst, {0}, set()) == pytest.approx(
        _conditional_oracle(inst, {0}, set()), rel=1e-10)
    others = rng.permutation(np.arange(1, n))
    inc = {0} | set(others[:2].tolist())
    exc = set(others[2:4].tolist())
    assert conditional_connection_cost(inst, inc, exc) == pytest.approx(
        _conditional_oracle(inst, inc, exc), rel=1e-10)


def test_conditional_connection_cost_decided(rng):
    inst = random_instance(rng, 7)
    inc, exc = {0, 2, 5}, {1, 3, 4, 6}
    direct = sum(2 * inst.p[v] * dist_to_set(inst, v, inc) for v in range(7))
    assert conditional_connection_cost(inst, inc, exc) == pytest.approx(direct, rel=1e-12)
    with pytest.raises(ValueError):
        conditional_connection_cost(inst, {1}, set())
    with pytest.raises(ValueError):
        conditional_connection_cost(inst, {0, 1}, {1})


def test_master_route_lp_is_a_relaxation(rng):
    inst = random_instance(rng, 7)
    lp = solve_master_route_lp(inst)
    q = 1 - np.prod(1 - inst.p[1:])
    full_tour = held_karp(inst).cost
    # b = r^v = 0 and b = tour edges is feasible; the LP can only be cheaper
    assert lp.value <= q * full_tour + 1e-7
    b_cost = sum(inst.dist[e] * x for e, x in lp.b.items())
    r_cost = sum(inst.p[v] * sum(inst.dist[e] * x for e, x in r.items()) for v, r in lp.r.items())
    assert lp.value == pytest.approx(q * b_cost + r_cost, rel=1e-7)
    assert lp.cuts >= inst.n - 1


def test_all_active_forces_full_master_set(rng):
    inst = random_instance(rng, 6).with_probabilities(np.ones(6), depot=0)
    res = derandomized_master_route_traced(inst)
    assert all(take for _, take in res.decisions)
    assert res.tour == held_karp(inst).tour


def test_tiny_uniform_probabilities_keep_only_the_depot():
    inst = Instance.uniform(7, 1e-4).make_depot(0)
    res = derandomized_master_route_traced(inst)
    assert not any(take for _, take in res.decisions)
    assert set(res.solution.master_set) == {0}


@pytest.mark.parametrize("seed", range(12))
def test_derandomized_chain(seed):
    rng = np.random.default_rng(1000 + seed)
    n = int(rng.integers(4, 9))
    inst = random_instance(rng, n)
    res = derandomized_master_route_traced(inst)
    traj = res.trajectory
    assert len(traj) == n
    assert all(b <= a + 1e-9 * max(1.0, a) for a, b in zip(traj, traj[1:]))
    cost = expected_tour_cost_exact(inst, res.tour)
    mr = mr_cost_exact(inst, res.solution.master_set, res.solution.master_cost)
    assert cost <= mr + 1e-9 <= traj[-1] + 2e-9
    assert traj[0] == pytest.approx(
        pessimistic_estimator(inst, res.lp, {0}, set(), LP_ALPHA["exact"]), rel=1e-12)
    opt = optimal_apriori_bruteforce(inst)[1]
    assert cost <= 6.5 * opt + 1e-9
    assert derandomized_master_route(inst) == res.tour


def test_derandomized_needs_depot(rng):
    with pytest.raises(ValueError):
        derandomized_master_route(random_instance(rng, 5, depot=None))


def test_lp_alpha_matches_solver_guarantees():
    inst = Instance.uniform(5, 0.5).make_depot(0)
    lp_value, _ = subtour_lp_value(inst)
    assert lp_value == pytest.approx(5.0)
    assert LP_ALPHA == {"exact": 1.5, "christofides": 1.5, "double-tree": 2.0}
