"""Exact, brute-force and Monte-Carlo expected costs of a priori tours and master routes."""

from __future__ import annotations

import itertools
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping

import numpy as np

from .instance import Instance, Tour, dist_to_set, nearest_in_set, tour_cost
from .tsp import TspResult, all_subset_tsp_costs

BRUTEFORCE_SUBSET_LIMIT = 20
BRUTEFORCE_TOUR_LIMIT = 9
MIN_MR_LIMIT = 12
MC_CHUNK = 1 << 14


@dataclass(frozen=True)
class ExpectedCostReport:
    value: float
    method: str  # exact | monte_carlo | brute_force
    stderr: float | None = None
    samples: int | None = None

    def __post_init__(self):
        if (self.method == "monte_carlo") != (self.stderr is not None):
            raise ValueError("stderr is reported for Monte-Carlo estimates only")

    def to_json(self) -> dict:
        return {"value": self.value, "method": self.method,
                "stderr": self.stderr, "samples": self.samples}


@dataclass(frozen=True)
class MasterRouteSolution:
    """Master set, a tour on it, and the hub each outside customer attaches to."""

    master_set: frozenset[int]
    master_tour: Tour
    hub: Mapping[int, int]
    master_cost: float

    @classmethod
    def build(cls, inst: Instance, master_set: Iterable[int], master_tour: Tour
              ) -> "MasterRouteSolution":
        s = frozenset(master_set)
        if not s:
            raise ValueError("master set must be nonempty")
        if set(master_tour.order) != s:
            raise ValueError("master tour must visit exactly the master set")
        hub = {v: nearest_in_set(inst, v, s) for v in range(inst.n) if v not in s}
        return cls(s, master_tour, hub, tour_cost(inst, master_tour.order))


# -- a priori tours -------------------------------------------------------

def expected_tour_cost_exact(inst: Instance, t: Tour) -> float:
    """Exact expected length of the shortcut tour.

    Sums, over ordered pairs (u, w), the probability that w is the next active
    customer after u in tour direction times c(u, w).
    """
    order = np.asarray(t.order, dtype=int)
    k = len(order)
    if k < 2:
        return 0.0
    p = inst.p[order]
    q = 1.0 - p
    d = inst.dist[np.ix_(order, order)]
    pos = np.arange(k)
    between = np.ones(k)  # product of (1-p) strictly between i and i+off
    total = 0.0
    for off in range(1, k):
        if off > 1:
            between = between * q[(pos + off - 1) % k]
        j = (pos + off) % k
        total += float(np.sum(p * p[j] * between * d[pos, j]))
    return total


def _batch_shortcut_costs(d_ord: np.ndarray, active: np.ndarray) -> np.ndarray:
    """Shortcut cost for each row of a boolean activity matrix given in tour order."""
    rows, k = active.shape
    big = 2 * k
    pos = np.arange(2 * k)
    doubled = np.concatenate([active, active], axis=1)
    marks = np.where(doubled, pos, big)
    suffix = np.minimum.accumulate(marks[:, ::-1], axis=1)[:, ::-1]
    nxt = suffix[:, 1:k + 1] % k  # next active strictly after i (i itself if alone)
    idx = np.arange(k)
    return np.where(active, d_ord[idx[None, :], nxt], 0.0).sum(axis=1)


def _tour_order_matrix(inst: Instance, t: Tour) -> tuple[np.ndarray, np.ndarray]:
    order = np.asarray(t.order, dtype=int)
    if sorted(order.tolist()) != list(range(inst.n)):
        raise ValueError("tour must visit every customer exactly once")
    return order, inst.dist[np.ix_(order, order)]


def expected_cost_bruteforce(inst: Instance, t: Tour) -> float:
    """Probability-weighted shortcut cost over all 2^n active sets."""
    n = inst.n
    if n > BRUTEFORCE_SUBSET_LIMIT:
        raise ValueError(f"brute force limited to n <= {BRUTEFORCE_SUBSET_LIMIT}, got {n}")
    order, d_ord = _tour_order_matrix(inst, t)
    p = inst.p[order]
    bits = np.arange(n)
    total = 0.0
    step = 1 << 14
    for start in range(0, 1 << n, step):
        masks = np.arange(start, min(start + step, 1 << n))
        active = ((masks[:, None] >> bits[None, :]) & 1).astype(bool)
        prob = np.where(active, p, 1.0 - p).prod(axis=1)
        total += float(np.dot(prob, _batch_shortcut_costs(d_ord, active)))
    return total


def _mc_chunk(p, d_ord, seed_seq, size):
    rng = np.random.default_rng(seed_seq)
    active = rng.random((size, len(p))) < p
    return _batch_shortcut_costs(d_ord, active)


def expected_cost_monte_carlo(inst: Instance, t: Tour, samples: int, seed: int,
                              threads: int | None = None) -> ExpectedCostReport:
    """Sample-mean estimate with standard error.

    Samples come in fixed chunks, each with its own stream spawned from
    ``seed``, so the result does not depend on ``threads`` (default: the
    ``APTSP_THREADS`` environment variable, else 1).
    """
    if samples < 1:
        raise ValueError("need at least one sample")
    order, d_ord = _tour_order_matrix(inst, t)
    p = inst.p[order]
    n_chunks = -(-samples // MC_CHUNK)
    sizes = [min(MC_CHUNK, samples - c * MC_CHUNK) for c in range(n_chunks)]
    streams = np.random.SeedSequence(seed).spawn(n_chunks)
    threads = threads or int(os.environ.get("APTSP_THREADS", "1"))
    if threads > 1 and n_chunks > 1:
        with ThreadPoolExecutor(threads) as pool:
            chunks = list(pool.map(lambda c: _mc_chunk(p, d_ord, streams[c], sizes[c]),
                                   range(n_chunks)))
    else:
        chunks = [_mc_chunk(p, d_ord, streams[c], sizes[c]) for c in range(n_chunks)]
    # shift by the first draw so that constant samples give an exact mean
    ref = float(chunks[0][0])
    s1 = sum(float(np.sum(c - ref)) for c in chunks)
    s2 = sum(float(np.sum((c - ref) ** 2)) for c in chunks)
    mean = ref + s1 / samples
    if samples > 1:
        var = max(0.0, (s2 - s1 * s1 / samples) / (samples - 1))
        stderr = float(np.sqrt(var / samples))
    else:
        stderr = 0.0
    return ExpectedCostReport(mean, "monte_carlo", stderr, samples)


def optimal_apriori_bruteforce(inst: Instance) -> tuple[Tour, float]:
    """Best a priori tour over all (n-1)!/2 cyclic orders."""
    n = inst.n
    if n > BRUTEFORCE_TOUR_LIMIT:
        raise ValueError(f"tour brute force limited to n <= {BRUTEFORCE_TOUR_LIMIT}, got {n}")
    if n <= 3:
        t = Tour(tuple(range(n)))
        return t, expected_tour_cost_exact(inst, t)
    perms = np.array([(0,) + q for q in itertools.permutations(range(1, n)) if q[0] < q[-1]])
    costs = _batch_expected_costs(inst, perms)
    best = int(np.argmin(costs))
    return Tour(tuple(perms[best].tolist())), float(costs[best])


def _batch_expected_costs(inst: Instance, tours: np.ndarray) -> np.ndarray:
    """Exact expected cost for every row of ``tours`` at once."""
    m, k = tours.shape
    p = inst.p[tours]
    q = 1.0 - p
    pos = np.arange(k)
    between = np.ones((m, k))
    total = np.zeros(m)
    for off in range(1, k):
        if off > 1:
            between = between * q[:, (pos + off - 1) % k]
        j = (pos + off) % k
        total += (p * p[:, j] * between * inst.dist[tours, tours[:, j]]).sum(axis=1)
    return total


# -- master routes ----------------------------------------------------------

def mr_cost_exact(inst: Instance, s: Iterable[int], master_cost: float) -> float:
    """Expected master-route cost when a depot is present in ``s``."""
    s = set(s)
    d = inst.depot
    if d is None or d not in s:
        raise ValueError("mr_cost_exact needs a depot contained in the master set")
    others = [v for v in range(inst.n) if v != d]
    q = float(np.prod(1.0 - inst.p[others])) if others else 1.0
    conn = sum(inst.p[v] * dist_to_set(inst, v, s) for v in others)
    return (1.0 - q) * master_cost + 2.0 * float(conn)


def _absence_products(p: np.ndarray) -> tuple[float, np.ndarray]:
    """P[nobody active] and, for each v, P[nobody other than v active]."""
    q = 1.0 - p
    pre = np.concatenate([[1.0], np.cumprod(q)[:-1]])
    suf = np.concatenate([np.cumprod(q[::-1])[::-1][1:], [1.0]])
    return float(np.prod(q)), pre * suf


def mr_cost_exact_general(inst: Instance, s: Iterable[int], master_cost: float) -> float:
    """Expected master-route cost, no depot required.

    The master tour is paid iff at least two customers are active:
    P[|A| >= 2] = 1 - P[A empty] - sum_v p(v) * P[nobody but v].
    Customer v pays its connection iff it is active and someone else is:
    p(v) * (1 - P[nobody but v]).
    """
    s = list(s)
    if not s:
        raise ValueError("master set must be nonempty")
    p = inst.p
    none, only = _absence_products(p)
    at_least_two = 1.0 - none - float(np.dot(p, only))
    conn = inst.dist[:, s].min(axis=1)
    return at_least_two * master_cost + 2.0 * float(np.sum(p * conn * (1.0 - only)))


def all_subset_mr_costs(inst: Instance, tsp_costs: np.ndarray | None = None) -> np.ndarray:
    """mr_cost_exact_general with optimal master tours, for every bitmask subset."""
    n = inst.n
    if tsp_costs is None:
        tsp_costs = all_subset_tsp_costs(inst)
    p = inst.p
    none, only = _absence_products(p)
    at_least_two = 1.0 - none - float(np.dot(p, only))
    weight = 2.0 * p * (1.0 - only)
    size = 1 << n
    conn = np.full((size, n), np.inf)
    for mask in range(1, size):
        low = (mask & -mask).bit_length() - 1
        conn[mask] = np.minimum(conn[mask & (mask - 1)], inst.dist[low])
    out = at_least_two * tsp_costs + conn @ weight
    out[0] = np.inf
    return out


def min_mr_bruteforce(inst: Instance, tsp: Callable[..., TspResult] | None = None
                      ) -> tuple[frozenset[int], float]:
    """Master set minimizing the expected master-route cost, with optimal master tours.

    Only sets containing the depot are considered when one exists. ``tsp``, if
    given, is called as ``tsp(inst, subset)`` instead of the built-in
    all-subsets dynamic program.
    """
    n = inst.n
    if n > MIN_MR_LIMIT:
        raise ValueError(f"min_mr_bruteforce limited to n <= {MIN_MR_LIMIT}, got {n}")
    if tsp is None:
        costs = all_subset_mr_costs(inst)
    else:
        tsp_costs = np.zeros(1 << n)
        for mask in range(1, 1 << n):
            members = [v for v in range(n) if mask >> v & 1]
            tsp_costs[mask] = tsp(inst, members).cost
        costs = all_subset_mr_costs(inst, tsp_costs)
    masks = np.arange(1 << n)
    if inst.depot is not None:
        costs = np.where((masks >> inst.depot) & 1, costs, np.inf)
    best = int(np.argmin(costs))
    return frozenset(v for v in range(n) if best >> v & 1), float(costs[best])


def expected_sampled_mr(inst: Instance, include_prob: np.ndarray | None = None) -> float:
    """E[MR(S)] when S holds each customer independently (default: with p(v)).

    Every master tour is optimal; the depot, if any, is always in S.
    """
    n = inst.n
    if n > MIN_MR_LIMIT:
        raise ValueError(f"expected_sampled_mr limited to n <= {MIN_MR_LIMIT}, got {n}")
    q = inst.p.copy() if include_prob is None else np.asarray(include_prob, dtype=float).copy()
    if inst.depot is not None:
        q[inst.depot] = 1.0
    costs = all_subset_mr_costs(inst)
    masks = np.arange(1 << n)
    active = ((masks[:, None] >> np.arange(n)[None, :]) & 1).astype(bool)
    weight = np.where(active, q, 1.0 - q).prod(axis=1)
    keep = weight > 0
    return float(np.dot(weight[keep], costs[keep]))


def empirical_master_route_ratio(inst: Instance, opt: float | None = None) -> float:
    """Best master-route cost over the optimal a priori cost (0/0 read as 1)."""
    if inst.n > BRUTEFORCE_TOUR_LIMIT:
        raise ValueError(f"ratio needs n <= {BRUTEFORCE_TOUR_LIMIT}, got {inst.n}")
    if opt is None:
        opt = optimal_apriori_bruteforce(inst)[1]
    _, mr = min_mr_bruteforce(inst)
    if opt == 0.0:
        if mr == 0.0:
            return 1.0
        return float("inf")
    return mr / opt
