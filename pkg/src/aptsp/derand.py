"""Deterministic master-route algorithm by conditional expectations over an LP relaxation."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import networkx as nx
import numpy as np

from .algorithms import build_master_route_tour
from .evaluation import MasterRouteSolution
from .instance import Instance, Tour
from .lp.model import LpModel, solve_lp
from .tsp import CUT_TOL

# guarantee of each TSP routine relative to the subtour LP
LP_ALPHA = {"exact": 1.5, "christofides": 1.5, "double-tree": 2.0}

Edge = tuple[int, int]


@dataclass
class MasterRouteLp:
    value: float
    b: dict[Edge, float]
    r: dict[int, dict[Edge, float]]
    cuts: int


@dataclass
class DerandState:
    included: set[int]
    excluded: set[int]
    lp_b: dict[Edge, float]
    lp_r: dict[int, dict[Edge, float]]
    estimator: float


@dataclass
class DerandResult:
    tour: Tour
    solution: MasterRouteSolution
    lp: MasterRouteLp
    trajectory: list[float] = field(default_factory=list)
    decisions: list[tuple[int, bool]] = field(default_factory=list)


def _no_show(p: np.ndarray, depot: int) -> float:
    q = np.delete(1.0 - p, depot)
    return float(np.prod(q))


def solve_master_route_lp(inst: Instance, max_rounds: int = 500) -> MasterRouteLp:
    """Buy/rent LP relaxation of the best master-route solution, by cutting planes.

    Separation: for each customer v a minimum v-depot cut under capacities b + r^v.
    """
    d = inst.depot
    if d is None:
        raise ValueError("the master-route LP needs a depot")
    n = inst.n
    customers = [v for v in range(n) if v != d]
    edges = list(itertools.combinations(range(n), 2))
    big_q = 1.0 - _no_show(inst.p, d)
    lp = LpModel("min")
    b_col = {e: lp.add_var(f"b_{e[0]}_{e[1]}", big_q * inst.dist[e]) for e in edges}
    r_col = {v: {e: lp.add_var(f"r{v}_{e[0]}_{e[1]}", inst.p[v] * inst.dist[e]) for e in edges}
             for v in customers}

    def add_cut(v: int, side: set[int]) -> None:
        coeffs = {}
        for e in edges:
            if (e[0] in side) != (e[1] in side):
                coeffs[b_col[e]] = 1.0
                coeffs[r_col[v][e]] = 1.0
        lp.add_row(coeffs, ">=", 2.0)

    for v in customers:
        add_cut(v, {v})
    cuts = len(customers)
    for _ in range(max_rounds):
        res = solve_lp(lp)
        if not res.optimal:
            raise RuntimeError(f"master-route LP is {res.status}")
        x = res.x
        added = False
        for v in customers:
            g = nx.Graph()
            g.add_nodes_from(range(n))
            for e in edges:
                cap = x[b_col[e]] + x[r_col[v][e]]
                if cap > 1e-12:
                    g.add_edge(*e, capacity=float(cap))
            val, (side_v, _) = nx.minimum_cut(g, v, d)
            if val < 2.0 - CUT_TOL:
                add_cut(v, set(side_v))
                cuts += 1
                added = True
        if not added:
            b = {e: float(x[j]) for e, j in b_col.items() if x[j] > 1e-12}
            r = {v: {e: float(x[j]) for e, j in cols.items() if x[j] > 1e-12}
                 for v, cols in r_col.items()}
            return MasterRouteLp(float(res.value), b, r, cuts)
    raise RuntimeError("master-route LP cutting planes did not converge")


def conditional_connection_cost(inst: Instance, included, excluded) -> float:
    """Expected connection cost 2 sum_v p(v) E[dist(v, S)] given P in S and S disjoint from P-bar.

    Undecided customers join S independently with probability p.
    """
    included, excluded = set(included), set(excluded)
    if inst.depot is not None and inst.depot not in included:
        raise ValueError("the depot must be included")
    if included & excluded:
        raise ValueError("included and excluded sets overlap")
    if not included:
        raise ValueError("at least one customer must be included")
    total = 0.0
    for v in range(inst.n):
        if v in included:
            continue
        cands = sorted((u for u in range(inst.n) if u not in excluded),
                       key=lambda u: (inst.dist[v, u], u))
        none_closer, expect = 1.0, 0.0
        for u in cands:
            join = 1.0 if u in included else float(inst.p[u])
            expect += none_closer * join * inst.dist[v, u]
            none_closer *= 1.0 - join
            if none_closer == 0.0:
                break
        total += 2.0 * float(inst.p[v]) * expect
    return total


def _master_bound(inst: Instance, lp: MasterRouteLp, included, excluded, alpha: float) -> float:
    d = inst.depot
    undecided = [v for v in range(inst.n) if v not in included and v not in excluded]
    if len(included) >= 2:
        q = 1.0
    else:
        q = 1.0 - float(np.prod([1.0 - inst.p[v] for v in undecided]))
    cost = q * sum(inst.dist[e] * val for e, val in lp.b.items())
    for v, r in lp.r.items():
        if v == d or v in excluded:
            continue
        weight = 1.0 if v in included else float(inst.p[v])
        cost += weight * sum(inst.dist[e] * val for e, val in r.items())
    return alpha * cost


def pessimistic_estimator(inst: Instance, lp: MasterRouteLp, included, excluded,
                          alpha: float) -> float:
    return (conditional_connection_cost(inst, included, excluded)
            + _master_bound(inst, lp, included, excluded, alpha))


def derandomized_master_route_traced(inst: Instance, tsp_kind: str = "exact") -> DerandResult:
    d = inst.depot
    if d is None:
        raise ValueError("the deterministic algorithm needs a depot")
    alpha = LP_ALPHA[tsp_kind]
    lp = solve_master_route_lp(inst)
    state = DerandState({d}, set(), lp.b, lp.r, 0.0)
    state.estimator = pessimistic_estimator(inst, lp, state.included, state.excluded, alpha)
    trajectory = [state.estimator]
    decisions = []
    for v in range(inst.n):
        if v == d:
            continue
        inc = pessimistic_estimator(inst, lp, state.included | {v}, state.excluded, alpha)
        exc = pessimistic_estimator(inst, lp, state.included, state.excluded | {v}, alpha)
        take = inc <= exc
        new = min(inc, exc)
        if new > state.estimator + 1e-9 * max(1.0, abs(state.estimator)):
            raise AssertionError(f"estimator increased at customer {v}: "
                                 f"{state.estimator} -> {new}")
        (state.included if take else state.excluded).add(v)
        state.estimator = new
        trajectory.append(new)
        decisions.append((v, take))
    tour, sol = build_master_route_tour(inst, state.included, tsp_kind)
    return DerandResult(tour, sol, lp, trajectory, decisions)


def derandomized_master_route(inst: Instance, tsp_kind: str = "exact") -> Tour:
    """Master-route tour whose master set is fixed customer by customer (ascending index)."""
    return derandomized_master_route_traced(inst, tsp_kind).tour
