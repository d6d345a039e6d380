"""Sampling-based a priori TSP algorithms, depot reduction and normalization by copies."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from math import comb
from typing import Callable

import numpy as np

from .evaluation import MasterRouteSolution, expected_tour_cost_exact
from .instance import Instance, Tour, subsets
from .tsp import solve_tsp

LOW_ACTIVITY_BUDGET = 10_000_000
SAMPLING_RHO = 3.1
DERAND_RHO = 5.9


class BudgetExceeded(RuntimeError):
    pass


class NormalizationError(ValueError):
    """The requested epsilon is too large for the copy construction."""


@dataclass(frozen=True)
class SamplingPolicy:
    """Inclusion probability f(p) for the master set: ``identity``, ``power`` or ``scaled``."""

    kind: str = "power"
    sigma: float = 0.663

    def __post_init__(self):
        if self.kind not in ("identity", "power", "scaled"):
            raise ValueError(f"unknown policy kind {self.kind!r}")
        if self.kind != "identity" and not 0 < self.sigma <= 1:
            raise ValueError(f"sigma must lie in (0, 1], got {self.sigma}")

    @classmethod
    def parse(cls, text: str) -> "SamplingPolicy":
        """Parse ``identity``, ``power:0.663`` or ``scaled:0.5``."""
        kind, _, arg = text.partition(":")
        kind = kind.strip()
        if kind == "identity":
            if arg:
                raise ValueError("identity policy takes no parameter")
            return cls("identity", 1.0)
        return cls(kind, float(arg) if arg else 0.663)

    def __call__(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        if self.kind == "identity":
            f = p.copy()
        elif self.kind == "power":
            f = 1.0 - (1.0 - p) ** self.sigma
        else:
            f = self.sigma * p
        return np.where(p >= 1.0, 1.0, f)

    def __str__(self) -> str:
        return "identity" if self.kind == "identity" else f"{self.kind}:{self.sigma:g}"


def _require_depot(inst: Instance) -> int:
    if inst.depot is None:
        raise ValueError("this algorithm needs an instance with a depot")
    return inst.depot


def sample_master_set(inst: Instance, policy: SamplingPolicy, seed) -> frozenset[int]:
    """Depot plus every other customer independently with probability f(p)."""
    d = _require_depot(inst)
    rng = np.random.default_rng(seed)
    draws = rng.random(inst.n)
    keep = draws < policy(inst.p)
    keep[d] = True
    return frozenset(np.flatnonzero(keep).tolist())


def build_master_route_tour(inst: Instance, s, tsp_kind: str = "exact"
                            ) -> tuple[Tour, MasterRouteSolution]:
    """A priori tour following the master tour on ``s`` with detours to attached customers.

    Each customer outside ``s`` hangs off its nearest master customer and is
    visited right after it, nearest first.
    """
    members = sorted(set(s))
    if not members:
        raise ValueError("master set must be nonempty")
    master = solve_tsp(inst, members, tsp_kind).tour
    sol = MasterRouteSolution.build(inst, members, master)
    attached: dict[int, list[int]] = {h: [] for h in members}
    for v, h in sol.hub.items():
        attached[h].append(v)
    order = []
    for h in master.order:
        order.append(h)
        order.extend(sorted(attached[h], key=lambda v: (inst.dist[h, v], v)))
    return Tour(tuple(order)), sol


def run_sampling_algorithm(inst: Instance, policy: SamplingPolicy, tsp_kind: str = "exact",
                           seed=0) -> Tour:
    return sampling_run(inst, policy, tsp_kind, seed)[0]


def sampling_run(inst: Instance, policy: SamplingPolicy, tsp_kind: str = "exact", seed=0
                 ) -> tuple[Tour, MasterRouteSolution]:
    s = sample_master_set(inst, policy, seed)
    return build_master_route_tour(inst, s, tsp_kind)


def low_activity_cap(total_p: float, epsilon: float) -> int:
    """Subset-size cap beyond which a sampled active set is unlikely.

    With k the expected number of active customers and target tail
    probability epsilon/4: l = ceil(max(2ek, 8/epsilon)), cap = 2k + l.
    """
    ell = math.ceil(max(2 * math.e * total_p, 8.0 / epsilon))
    return math.ceil(2 * total_p + ell)


def solve_low_activity(inst: Instance, n_max: int, tsp_kind: str = "exact"
                       ) -> tuple[Tour, frozenset[int], float]:
    """Best master-route tour over all master sets with 2..n_max customers.

    Returns the tour, its master set and its exact expected cost.
    """
    n = inst.n
    top = min(n_max, n)
    if n < 2:
        t = Tour(tuple(range(n)))
        return t, frozenset(range(n)), 0.0
    count = sum(comb(n, k) for k in range(2, top + 1))
    if count > LOW_ACTIVITY_BUDGET:
        raise BudgetExceeded(f"{count} master sets exceed the budget of {LOW_ACTIVITY_BUDGET}")
    best = None
    for s in subsets(list(range(n)), 2, top):
        tour, _ = build_master_route_tour(inst, s, tsp_kind)
        cost = expected_tour_cost_exact(inst, tour)
        if best is None or cost < best[2]:
            best = (tour, frozenset(s), cost)
    return best


def best_depot_tour(inst: Instance, inner: Callable[[Instance], Tour], threads: int = 1
                    ) -> tuple[Tour, int, list[float]]:
    """Try every customer as depot and keep the tour that is cheapest on the original instance.

    Returns the tour, the chosen depot and the evaluated cost of every candidate.
    Candidates are independent, so ``threads > 1`` runs them in a pool; ties go
    to the lowest index either way.
    """
    def candidate(v: int) -> tuple[Tour, float]:
        tour = inner(inst.make_depot(v))
        return tour, expected_tour_cost_exact(inst, tour)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(candidate, range(inst.n)))
    else:
        results = [candidate(v) for v in range(inst.n)]
    costs = [c for _, c in results]
    v = int(np.argmin(costs))
    return results[v][0], v, costs


@dataclass
class AprioriConfig:
    algorithm: str = "sampling"  # sampling | derand
    policy: SamplingPolicy = field(default_factory=SamplingPolicy)
    tsp_kind: str = "exact"
    seed: int = 0
    n_max: int | None = None
    threads: int = 1

    @property
    def rho(self) -> float:
        return SAMPLING_RHO if self.algorithm == "sampling" else DERAND_RHO

    def depot_algorithm(self) -> Callable[[Instance], Tour]:
        if self.algorithm == "sampling":
            return lambda i: run_sampling_algorithm(i, self.policy, self.tsp_kind, self.seed)
        if self.algorithm == "derand":
            from .derand import derandomized_master_route
            return lambda i: derandomized_master_route(i, self.tsp_kind)
        raise ValueError(f"unknown depot algorithm {self.algorithm!r}")


def solve_apriori_traced(inst: Instance, epsilon: float, cfg: AprioriConfig | None = None
                         ) -> tuple[Tour, dict]:
    cfg = cfg or AprioriConfig()
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    inner = cfg.depot_algorithm()
    if inst.depot is not None:
        return inner(inst), {"branch": "depot"}
    total = float(inst.p.sum())
    threshold = 2.0 * cfg.rho / epsilon
    if total < threshold:
        cap = cfg.n_max if cfg.n_max is not None else low_activity_cap(total, epsilon)
        tour, s, _ = solve_low_activity(inst, cap, cfg.tsp_kind)
        return tour, {"branch": "low-activity", "total_p": total, "threshold": threshold,
                      "n_max": cap, "master_set": sorted(s)}
    tour, v, costs = best_depot_tour(inst, inner, cfg.threads)
    return tour, {"branch": "best-depot", "total_p": total, "threshold": threshold,
                  "depot": v, "candidate_costs": costs}


def solve_apriori(inst: Instance, epsilon: float, cfg: AprioriConfig | None = None) -> Tour:
    """Dispatch on total activity: enumeration when low, best depot choice when high."""
    return solve_apriori_traced(inst, epsilon, cfg)[0]


# -- normalization -----------------------------------------------------------

@dataclass(frozen=True)
class NormalizationPlan:
    epsilon: float
    lam: float
    sigma: float
    copies: dict[int, int]
    projection: tuple[int, ...]

    def conditions(self, p: float, k: int) -> tuple[bool, bool, bool, bool]:
        """The four per-customer conditions the copy count must satisfy."""
        eps, lam, sig = self.epsilon, self.lam, self.sigma
        tol = 1e-12
        c1 = 1 - (1 - eps) ** k <= p + tol and p <= eps * k + tol
        c2 = (1 - p) ** sig <= (1 - sig * eps) ** k + tol
        c3 = 1 - (1 - p) ** sig <= (1 + lam) * (1 - (1 - sig * eps) ** k) + tol
        if p < 1:
            c4 = (1 - eps) ** k <= (1 + lam) * (1 - p) + tol
        else:
            c4 = (1 - eps) ** k <= lam + tol
        return c1, c2, c3, c4


def copy_count(p: float, epsilon: float, lam: float, sigma: float) -> int:
    if p >= 1.0:
        return math.ceil(max(1.0 / epsilon,
                             math.log(lam / (1.0 + lam)) / math.log(1.0 - sigma * epsilon)))
    # small guard so p == epsilon gives exactly one copy despite rounding
    return math.floor(math.log1p(-p) / math.log1p(-epsilon) + 1e-12)


def normalize_instance(inst: Instance, epsilon: float, lam: float, sigma: float = 0.663
                       ) -> tuple[Instance, NormalizationPlan]:
    """Replace each non-depot customer by copies at distance 0, each active with probability epsilon.

    The depot becomes customer 0 of the new instance.
    """
    d = _require_depot(inst)
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    if lam <= 0:
        raise ValueError("lambda must be positive")
    copies: dict[int, int] = {}
    projection = [d]
    plan_stub = NormalizationPlan(epsilon, lam, sigma, {}, ())
    for v in range(inst.n):
        if v == d:
            continue
        p = float(inst.p[v])
        k = copy_count(p, epsilon, lam, sigma)
        bad = [i + 1 for i, ok in enumerate(plan_stub.conditions(p, k)) if not ok]
        if k < 1 or bad:
            raise NormalizationError(
                f"epsilon={epsilon} too large for customer {v} (p={p}, k={k}); "
                f"failed condition(s) {bad or [1]}")
        copies[v] = k
        projection.extend([v] * k)
    proj = np.asarray(projection)
    dist = inst.dist[np.ix_(proj, proj)]
    p_new = np.full(len(proj), epsilon)
    p_new[0] = 1.0
    names = None
    if inst.names is not None:
        names = tuple(inst.names[v] if i == 0 else f"{inst.names[v]}#{i}"
                      for i, v in enumerate(projection))
    plan = NormalizationPlan(epsilon, lam, sigma, copies, tuple(projection))
    return Instance(dist, p_new, 0, names), plan
