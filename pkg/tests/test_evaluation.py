import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aptsp.evaluation import (ExpectedCostReport, MasterRouteSolution, all_subset_mr_costs,
                              empirical_master_route_ratio, expected_cost_bruteforce,
                              expected_cost_monte_carlo, expected_sampled_mr,
                              expected_tour_cost_exact, min_mr_bruteforce, mr_cost_exact,
                              mr_cost_exact_general, optimal_apriori_bruteforce)
from aptsp.instance import Instance, Tour, tour_cost
from aptsp.lowerbounds import MrrLbParams, gen_mrr_lb_instance
from aptsp.tsp import held_karp

from conftest import instances, random_instance


def _enumerate(inst, fn):
    """Sum of P[A] * fn(A) over every active set A, straight from the definition."""
    total = 0.0
    for bits in itertools.product((0, 1), repeat=inst.n):
        prob = math.prod(inst.p[v] if b else 1 - inst.p[v] for v, b in enumerate(bits))
        if prob:
            total += prob * fn([v for v, b in enumerate(bits) if b])
    return total


def _mr_oracle(inst, s):
    s = sorted(s)
    master = held_karp(inst, s).cost if len(s) > 1 else 0.0

    def cost(active):
        if len(active) < 2:
            return 0.0
        return master + 2 * sum(inst.dist[v, s].min() for v in active)
    return _enumerate(inst, cost)


def test_trivial_values():
    inst = Instance.uniform(5, 1.0)
    t = Tour(tuple(range(5)))
    assert expected_tour_cost_exact(inst, t) == pytest.approx(5.0)
    two = Instance(np.array([[0, 3.5], [3.5, 0]]), [1, 1])
    assert expected_tour_cost_exact(two, Tour((0, 1))) == pytest.approx(7.0)
    assert expected_cost_bruteforce(Instance(np.zeros((1, 1)), [0.4]), Tour((0,))) == 0.0


def test_uniform_three_customers():
    q = 0.37
    inst = Instance.uniform(3, 1.0).with_probabilities([1, 1, q])
    assert expected_cost_bruteforce(inst, Tour((0, 1, 2))) == pytest.approx(2 + q, abs=1e-15)
    assert expected_tour_cost_exact(inst, Tour((0, 2, 1))) == pytest.approx(2 + q, abs=1e-15)


def test_bruteforce_matches_definition(rng):
    for _ in range(5):
        inst = random_instance(rng, 7, depot=None)
        t = Tour(tuple(rng.permutation(7)))
        oracle = _enumerate(inst, lambda a: tour_cost(inst, [v for v in t.order if v in a]))
        assert expected_cost_bruteforce(inst, t) == pytest.approx(oracle, rel=1e-12)


@settings(max_examples=80, deadline=None)
@given(instances(min_n=1, max_n=9), st.data())
def test_exact_matches_bruteforce(inst, data):
    t = Tour(tuple(data.draw(st.permutations(range(inst.n)))))
    assert expected_tour_cost_exact(inst, t) == pytest.approx(
        expected_cost_bruteforce(inst, t), rel=1e-9, abs=1e-9)


def test_bruteforce_cutoff_is_an_error():
    inst = Instance.uniform(21, 0.5)
    with pytest.raises(ValueError):
        expected_cost_bruteforce(inst, Tour(tuple(range(21))))


def test_monte_carlo_all_active_is_exact():
    inst = Instance.cycle_closure(7, 1.0)
    rep = expected_cost_monte_carlo(inst, Tour(tuple(range(7))), 5000, seed=3)
    assert rep.value == 7.0 and rep.stderr == 0.0 and rep.samples == 5000


def test_monte_carlo_deterministic_and_thread_independent(rng):
    inst = random_instance(rng, 10, depot=None)
    t = Tour(tuple(range(10)))
    a = expected_cost_monte_carlo(inst, t, 40_000, seed=11)
    b = expected_cost_monte_carlo(inst, t, 40_000, seed=11, threads=3)
    assert a == b
    assert a != expected_cost_monte_carlo(inst, t, 40_000, seed=12)


def test_monte_carlo_million_samples_within_four_sigma(rng):
    inst = random_instance(rng, 10, depot=None)
    t = Tour(tuple(rng.permutation(10)))
    rep = expected_cost_monte_carlo(inst, t, 1_000_000, seed=5)
    assert abs(rep.value - expected_tour_cost_exact(inst, t)) <= 4 * rep.stderr


def test_report_stderr_contract():
    with pytest.raises(ValueError):
        ExpectedCostReport(1.0, "exact", stderr=0.1)
    with pytest.raises(ValueError):
        ExpectedCostReport(1.0, "monte_carlo")


def test_group_instance_master_route_values():
    params = MrrLbParams(4, 3)
    inst = gen_mrr_lb_instance(params)
    assert mr_cost_exact(inst, {0}, 0.0) == pytest.approx(4.0)
    # master tour through the depot and k groups: k+1 unit edges
    for k in range(1, 5):
        s = {0} | {1 + 3 * g for g in range(k)}
        q = 1 - np.prod(1 - inst.p[1:])
        assert mr_cost_exact(inst, s, k + 1) == pytest.approx(q * (k + 1) + (4 - k))
        assert mr_cost_exact(inst, s, k + 1) <= k + 1 + (4 - k)


def test_master_route_full_set_and_general_form(rng):
    inst = random_instance(rng, 6)
    full = held_karp(inst).cost
    q = np.prod(1 - inst.p[1:])
    assert mr_cost_exact(inst, range(6), full) == pytest.approx((1 - q) * full)
    s = {0, 2, 5}
    c = held_karp(inst, s).cost
    assert mr_cost_exact_general(inst, s, c) == pytest.approx(mr_cost_exact(inst, s, c))
    with pytest.raises(ValueError):
        mr_cost_exact(inst, {1, 2}, 1.0)


def test_general_form_two_customers():
    q = 0.3
    inst = Instance(np.array([[0, 2.0], [2.0, 0]]), [q, q])
    assert mr_cost_exact_general(inst, {0}, 0.0) == pytest.approx(2 * q * q * 2.0)
    ones = Instance.cycle_closure(5, 1.0)
    assert mr_cost_exact_general(ones, {0, 2}, 4.0) == pytest.approx(4.0 + 2 * (1 + 1 + 1))


@pytest.mark.parametrize("seed", range(6))
def test_general_form_matches_enumeration(seed):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, 8, depot=None if seed % 2 else 0)
    for _ in range(4):
        s = sorted(rng.choice(8, size=int(rng.integers(1, 8)), replace=False).tolist())
        if inst.depot is not None and 0 not in s:
            s = [0] + s
        master = held_karp(inst, s).cost if len(s) > 1 else 0.0
        assert mr_cost_exact_general(inst, s, master) == pytest.approx(_mr_oracle(inst, s),
                                                                       rel=1e-10)


def test_all_subset_costs_and_min_mr(rng):
    inst = random_instance(rng, 7)
    costs = all_subset_mr_costs(inst)
    best_mask, best = None, math.inf
    for mask in range(1, 1 << 7):
        if not mask & 1:
            continue
        s = [v for v in range(7) if mask >> v & 1]
        c = mr_cost_exact(inst, s, held_karp(inst, s).cost)
        assert costs[mask] == pytest.approx(c, rel=1e-10)
        if c < best - 1e-12:
            best_mask, best = mask, c
    s, value = min_mr_bruteforce(inst)
    assert value == pytest.approx(best, rel=1e-10)
    assert s == frozenset(v for v in range(7) if best_mask >> v & 1)
    s2, value2 = min_mr_bruteforce(inst, tsp=held_karp)
    assert value2 == pytest.approx(value) and s2 == s


def test_min_mr_special_cases():
    tiny = Instance.uniform(6, 1e-4).make_depot(0)
    assert min_mr_bruteforce(tiny)[0] == frozenset({0})
    ones = Instance.cycle_closure(6, 1.0, depot=0)
    s, value = min_mr_bruteforce(ones)
    assert s == frozenset(range(6)) and value == pytest.approx(6.0)


def test_master_route_solution_build(rng):
    inst = random_instance(rng, 6)
    sol = MasterRouteSolution.build(inst, {0, 3}, Tour((3, 0)))
    assert set(sol.hub) == {1, 2, 4, 5}
    assert sol.master_cost == pytest.approx(2 * inst.dist[0, 3])
    with pytest.raises(ValueError):
        MasterRouteSolution.build(inst, {0, 3}, Tour((0, 1)))


def test_optimal_apriori_bruteforce_matches_permutations(rng):
    inst = random_instance(rng, 6, depot=None)
    best = min(expected_tour_cost_exact(inst, Tour((0,) + perm))
               for perm in itertools.permutations(range(1, 6)))
    tour, value = optimal_apriori_bruteforce(inst)
    assert value == pytest.approx(best, rel=1e-12)
    assert expected_tour_cost_exact(inst, tour) == pytest.approx(value, rel=1e-12)


def test_empirical_ratio_values(rng):
    assert empirical_master_route_ratio(Instance.uniform(5, 1.0)) == pytest.approx(1.0)
    inst = Instance.uniform(6, 1e-3).make_depot(0)
    opt = optimal_apriori_bruteforce(inst)[1]
    s_best = min(
        (mr_cost_exact(inst, s, held_karp(inst, s).cost if len(s) > 1 else 0.0)
         for k in range(0, 6) for s in ([0, *c] for c in itertools.combinations(range(1, 6), k))))
    assert empirical_master_route_ratio(inst) == pytest.approx(s_best / opt, rel=1e-10)
    group = gen_mrr_lb_instance(MrrLbParams(4, 3))
    assert group.n == 13
    # 13 customers exceed the tour brute-force cutoff, so use n=2 groups of 3
    small = gen_mrr_lb_instance(MrrLbParams(2, 3))
    assert 1.0 <= empirical_master_route_ratio(small) <= 3.0


def test_expected_sampled_mr_matches_weighting(rng):
    inst = random_instance(rng, 6)
    costs = all_subset_mr_costs(inst)
    total = 0.0
    for mask in range(1 << 6):
        if not mask & 1:
            continue
        w = math.prod(inst.p[v] if mask >> v & 1 else 1 - inst.p[v] for v in range(1, 6))
        total += w * costs[mask]
    assert expected_sampled_mr(inst) == pytest.approx(total, rel=1e-12)
