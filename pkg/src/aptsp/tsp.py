"""TSP subroutines with a declared approximation guarantee, and the subtour LP."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import networkx as nx
import numpy as np

from .instance import Instance, Tour, tour_cost
from .lp.model import LpModel, solve_lp

HELD_KARP_LIMIT = 20
EXACT_MATCHING_LIMIT = 20
CUT_TOL = 1e-7

TSP_KINDS = ("exact", "christofides", "double-tree")


@dataclass(frozen=True)
class TspResult:
    tour: Tour
    cost: float
    guarantee: float


def _members(inst: Instance, subset) -> list[int]:
    members = sorted(set(int(v) for v in (range(inst.n) if subset is None else subset)))
    if not members:
        raise ValueError("TSP on an empty subset")
    return members


def _result(inst: Instance, order: Sequence[int], guarantee: float) -> TspResult:
    return TspResult(Tour(tuple(order)), tour_cost(inst, order), guarantee)


def held_karp(inst: Instance, subset=None) -> TspResult:
    """Optimal cycle on ``subset`` by bitmask dynamic programming."""
    members = _members(inst, subset)
    k = len(members)
    if k > HELD_KARP_LIMIT:
        raise ValueError(f"held_karp limited to {HELD_KARP_LIMIT} customers, got {k}")
    if k <= 3:
        return _result(inst, members, 1.0)
    d = inst.dist[np.ix_(members, members)]
    # members[0] is the fixed start; DP over the other m = k-1 vertices
    m = k - 1
    dd = d[1:, 1:]
    f = np.full((1 << m, m), np.inf)
    f[1 << np.arange(m), np.arange(m)] = d[0, 1:]
    everyone = np.arange(m)
    for mask in range(1, 1 << m):
        row = f[mask]
        if not np.isfinite(row).any():
            continue
        outside = everyone[((mask >> everyone) & 1) == 0]
        if not len(outside):
            continue
        cand = (row[:, None] + dd[:, outside]).min(axis=0)
        nxt = mask | (1 << outside)
        f[nxt, outside] = np.minimum(f[nxt, outside], cand)
    full = (1 << m) - 1
    # walk back from the best last vertex
    last = int(np.argmin(f[full] + d[1:, 0]))
    best = float(f[full, last] + d[1 + last, 0])
    order = [last]
    mask = full
    while mask != (1 << last):
        prev_mask = mask & ~(1 << last)
        prev = [v for v in range(m) if prev_mask >> v & 1]
        vals = [f[prev_mask, v] + dd[v, last] for v in prev]
        last = prev[int(np.argmin(vals))]
        mask = prev_mask
        order.append(last)
    order.reverse()
    res = _result(inst, [members[0]] + [members[1 + v] for v in order], 1.0)
    assert abs(res.cost - best) <= 1e-9 * max(1.0, best)
    return res


def all_subset_tsp_costs(inst: Instance, members: Sequence[int] | None = None) -> np.ndarray:
    """Optimal tour cost of every subset of ``members``, indexed by bitmask.

    Entry ``mask`` refers to ``{members[i] : bit i set}``; singletons and the
    empty set cost 0, pairs cost twice the edge.
    """
    members = list(range(inst.n)) if members is None else list(members)
    k = len(members)
    if k > 16:
        raise ValueError(f"all-subset TSP table limited to 16 customers, got {k}")
    d = inst.dist[np.ix_(members, members)]
    size = 1 << k
    f = np.full((size, k), np.inf)  # f[mask, v]: path from lowest bit of mask to v
    f[1 << np.arange(k), np.arange(k)] = 0.0
    opt = np.zeros(size)
    idx = np.arange(k)
    for mask in range(1, size):
        low = (mask & -mask).bit_length() - 1
        row = f[mask]
        opt[mask] = (row + d[:, low]).min()
        above = idx[(idx > low) & (((mask >> idx) & 1) == 0)]
        if len(above):
            cand = (row[:, None] + d[:, above]).min(axis=0)
            nxt = mask | (1 << above)
            f[nxt, above] = np.minimum(f[nxt, above], cand)
    return opt


def _mst(inst: Instance, members: list[int]) -> nx.Graph:
    g = nx.Graph()
    g.add_nodes_from(members)
    for u, v in itertools.combinations(members, 2):
        g.add_edge(u, v, weight=float(inst.dist[u, v]))
    return nx.minimum_spanning_tree(g, algorithm="prim")


def mst_cost(inst: Instance, subset=None) -> float:
    t = _mst(inst, _members(inst, subset))
    return float(sum(w for _, _, w in t.edges(data="weight")))


def double_tree(inst: Instance, subset=None) -> TspResult:
    """Preorder walk of a minimum spanning tree; at most twice the optimum."""
    members = _members(inst, subset)
    if len(members) <= 3:
        return _result(inst, members, 2.0)
    t = _mst(inst, members)
    return _result(inst, list(nx.dfs_preorder_nodes(t, source=members[0])), 2.0)


def _exact_matching(inst: Instance, odd: list[int]) -> list[tuple[int, int]]:
    d = inst.dist
    k = len(odd)

    @lru_cache(maxsize=None)
    def best(mask: int) -> tuple[float, tuple]:
        if mask == 0:
            return 0.0, ()
        i = (mask & -mask).bit_length() - 1
        rest = mask & ~(1 << i)
        top = (np.inf, ())
        for j in range(i + 1, k):
            if rest >> j & 1:
                sub, pairs = best(rest & ~(1 << j))
                val = sub + d[odd[i], odd[j]]
                if val < top[0]:
                    top = (val, ((odd[i], odd[j]),) + pairs)
        return top

    return list(best((1 << k) - 1)[1])


def _blossom_matching(inst: Instance, odd: list[int]) -> list[tuple[int, int]]:
    g = nx.Graph()
    g.add_weighted_edges_from((u, v, float(inst.dist[u, v]))
                              for u, v in itertools.combinations(odd, 2))
    return sorted(tuple(sorted(e)) for e in nx.min_weight_matching(g))


def christofides(inst: Instance, subset=None) -> TspResult:
    """MST plus minimum matching on odd-degree vertices, shortcut Euler tour.

    Up to ``EXACT_MATCHING_LIMIT`` odd vertices the matching comes from a
    bitmask DP; larger sets use networkx's blossom matching.
    """
    members = _members(inst, subset)
    if len(members) <= 3:
        return _result(inst, members, 1.5)
    t = _mst(inst, members)
    odd = sorted(v for v in members if t.degree(v) % 2)
    if len(odd) <= EXACT_MATCHING_LIMIT:
        matching = _exact_matching(inst, odd)
    else:
        matching = _blossom_matching(inst, odd)
    g = nx.MultiGraph(t)
    g.add_edges_from(matching)
    seen, order = set(), []
    for u, _ in nx.eulerian_circuit(g, source=members[0]):
        if u not in seen:
            seen.add(u)
            order.append(u)
    return _result(inst, order, 1.5)


SOLVERS: dict[str, Callable[..., TspResult]] = {
    "exact": held_karp,
    "christofides": christofides,
    "double-tree": double_tree,
}


def solve_tsp(inst: Instance, subset=None, kind: str = "exact") -> TspResult:
    try:
        solver = SOLVERS[kind]
    except KeyError:
        raise ValueError(f"unknown TSP solver {kind!r}; choose from {TSP_KINDS}") from None
    return solver(inst, subset)


def subtour_lp_value(inst: Instance, subset=None, max_rounds: int = 500
                     ) -> tuple[float, dict[tuple[int, int], float]]:
    """Optimum of the subtour-elimination LP on ``subset`` by cutting planes.

    Starts from the degree cuts and separates with minimum root-to-t cuts.
    Returns the LP value and the nonzero edge values keyed by ``(u, v)``, u < v.
    """
    members = _members(inst, subset)
    if len(members) < 2:
        raise ValueError("subtour LP needs at least two customers")
    edges = list(itertools.combinations(members, 2))
    model = LpModel("min")
    for u, v in edges:
        model.add_var(f"y_{u}_{v}", float(inst.dist[u, v]))
    col = {e: j for j, e in enumerate(edges)}

    def add_cut(side: set[int]):
        coeffs = {col[e]: 1.0 for e in edges if (e[0] in side) != (e[1] in side)}
        model.add_row(coeffs, ">=", 2.0)

    for v in members:
        add_cut({v})
    root = members[0]
    for _ in range(max_rounds):
        res = solve_lp(model)
        if not res.optimal:
            raise RuntimeError(f"subtour LP restricted master is {res.status}")
        y = res.x
        g = nx.Graph()
        g.add_nodes_from(members)
        for e, j in col.items():
            if y[j] > 1e-12:
                g.add_edge(*e, capacity=float(y[j]))
        added = False
        seen_cuts = set()
        for t in members[1:]:
            val, (_, side_t) = nx.minimum_cut(g, root, t)
            if val < 2.0 - CUT_TOL:
                key = frozenset(side_t)
                if key not in seen_cuts:
                    seen_cuts.add(key)
                    add_cut(set(side_t))
                    added = True
        if not added:
            sol = {e: float(y[j]) for e, j in col.items() if y[j] > 1e-12}
            return float(res.value), sol
    raise RuntimeError("subtour LP cutting planes did not converge")
