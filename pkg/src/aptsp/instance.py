"""Instances, tours and active sets of the a priori TSP, plus the metric primitives."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

TRIANGLE_TOL = 1e-9


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Instance:
    """Finite (semi-)metric space with independent activation probabilities.

    ``dist`` is a dense symmetric ``n x n`` matrix and ``p[v]`` the probability
    that customer ``v`` is active. ``depot`` (if set) is a customer with
    ``p == 1``. Construction does not validate the metric; call
    :func:`validate_instance` for that.
    """

    dist: np.ndarray
    p: np.ndarray
    depot: int | None = None
    names: tuple[str, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "dist", _frozen(self.dist))
        object.__setattr__(self, "p", _frozen(self.p))
        if self.dist.ndim != 2 or self.dist.shape[0] != self.dist.shape[1]:
            raise ValueError(f"distance matrix must be square, got shape {self.dist.shape}")
        if self.p.shape != (self.dist.shape[0],):
            raise ValueError(f"expected {self.dist.shape[0]} probabilities, got {self.p.shape}")
        if self.depot is not None and not 0 <= self.depot < self.n:
            raise ValueError(f"depot index {self.depot} out of range")
        if self.names is not None:
            if len(self.names) != self.n:
                raise ValueError("names must have one entry per customer")
            object.__setattr__(self, "names", tuple(self.names))

    @property
    def n(self) -> int:
        return self.dist.shape[0]

    def with_probabilities(self, p, depot: int | None = None) -> "Instance":
        return Instance(self.dist, p, depot, self.names)

    def make_depot(self, v: int) -> "Instance":
        """Copy of the instance with ``p(v) = 1`` and ``v`` declared the depot."""
        p = self.p.copy()
        p[v] = 1.0
        return Instance(self.dist, p, v, self.names)

    # -- constructors -----------------------------------------------------

    @classmethod
    def from_points(cls, points, p, depot: int | None = None) -> "Instance":
        pts = np.asarray(points, dtype=float)
        diff = pts[:, None, :] - pts[None, :, :]
        return cls(np.sqrt((diff**2).sum(axis=-1)), p, depot)

    @classmethod
    def uniform(cls, n: int, p, depot: int | None = None) -> "Instance":
        """All off-diagonal distances equal to 1."""
        return cls(np.ones((n, n)) - np.eye(n), np.broadcast_to(p, (n,)), depot)

    @classmethod
    def cycle_closure(cls, n: int, p, depot: int | None = None) -> "Instance":
        """Shortest-path metric of the unit-length cycle ``v_0, ..., v_{n-1}``."""
        i = np.arange(n)
        d = np.abs(i[:, None] - i[None, :])
        return cls(np.minimum(d, n - d), np.broadcast_to(p, (n,)), depot)

    @classmethod
    def random_euclidean(cls, n: int, rng: np.random.Generator, depot: int | None = 0,
                         p_low: float = 0.05, p_high: float = 1.0) -> "Instance":
        pts = rng.random((n, 2))
        p = rng.uniform(p_low, p_high, size=n)
        if depot is not None:
            p[depot] = 1.0
        return cls.from_points(pts, p, depot)

    # -- serialization ----------------------------------------------------

    def to_json(self) -> dict:
        out = {
            "n": self.n,
            "matrix": self.dist.tolist(),
            "p": self.p.tolist(),
            "depot": self.depot,
        }
        if self.names is not None:
            out["names"] = list(self.names)
        return out

    @classmethod
    def from_json(cls, data: dict) -> "Instance":
        n = int(data["n"])
        matrix = np.asarray(data["matrix"], dtype=float)
        if matrix.shape != (n, n):
            raise ValueError(f"matrix shape {matrix.shape} does not match n={n}")
        names = data.get("names")
        return cls(matrix, data["p"], data.get("depot"), tuple(names) if names else None)

    def dumps(self) -> str:
        return json.dumps(self.to_json())


@dataclass(frozen=True)
class Tour:
    """Cyclic order of customers; the stored sequence fixes the orientation."""

    order: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "order", tuple(int(v) for v in self.order))
        if len(set(self.order)) != len(self.order):
            raise ValueError("tour visits a customer twice")

    def __len__(self) -> int:
        return len(self.order)

    def __iter__(self):
        return iter(self.order)

    def check_covers(self, n: int) -> None:
        if sorted(self.order) != list(range(n)):
            raise ValueError(f"tour must be a permutation of 0..{n - 1}")

    def restricted(self, members: Iterable[int]) -> "Tour":
        keep = set(members)
        return Tour(tuple(v for v in self.order if v in keep))

    def to_json(self) -> dict:
        return {"order": list(self.order)}

    @classmethod
    def from_json(cls, data: dict) -> "Tour":
        return cls(tuple(data["order"]))


@dataclass(frozen=True)
class ActiveSet:
    members: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "members", frozenset(int(v) for v in self.members))

    def to_json(self) -> dict:
        return {"members": sorted(self.members)}

    @classmethod
    def from_json(cls, data: dict) -> "ActiveSet":
        return cls(frozenset(data["members"]))


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)
    triangle_witness: tuple[int, int, int] | None = None

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_json(self) -> dict:
        return {"ok": self.ok, "violations": list(self.violations),
                "triangle_witness": self.triangle_witness}


def validate_instance(inst: Instance, semi_metric: bool = True,
                      tol: float = TRIANGLE_TOL) -> ValidationReport:
    """Check symmetry, sign, triangle inequality and probability ranges.

    With ``semi_metric=False`` zero distances between distinct customers are
    reported as violations too.
    """
    rep = ValidationReport()
    d, n = inst.dist, inst.n
    if not np.all(np.isfinite(d)):
        rep.violations.append("non-finite distance")
        return rep
    if np.any(np.abs(np.diag(d)) > tol):
        rep.violations.append("nonzero diagonal")
    asym = np.argwhere(np.abs(d - d.T) > tol)
    if len(asym):
        i, j = asym[0]
        rep.violations.append(f"asymmetric entry ({i},{j})")
    neg = np.argwhere(d < -tol)
    if len(neg):
        i, j = neg[0]
        rep.violations.append(f"negative entry ({i},{j})")
    if not semi_metric:
        off = d + np.eye(n) * 1.0
        zero = np.argwhere(off <= tol)
        if len(zero):
            i, j = zero[0]
            rep.violations.append(f"zero distance between distinct customers ({i},{j})")
    # d[i,k] <= d[i,j] + d[j,k] for all triples
    for j in range(n):
        excess = d - (d[:, j][:, None] + d[j, :][None, :])
        bad = np.argwhere(excess > tol)
        if len(bad):
            i, k = bad[0]
            rep.triangle_witness = (int(i), int(j), int(k))
            rep.violations.append(
                f"triangle violation ({i},{j},{k}): c({i},{k})={d[i, k]:g} > "
                f"c({i},{j})+c({j},{k})={d[i, j] + d[j, k]:g}")
            break
    p = inst.p
    out = np.argwhere((p <= 0) | (p > 1) | ~np.isfinite(p)).ravel()
    for v in out:
        rep.violations.append(f"probability out of range at {v}: {p[v]}")
    if inst.depot is not None and p[inst.depot] != 1.0:
        rep.violations.append(f"depot {inst.depot} has p={p[inst.depot]} != 1")
    return rep


def tour_cost(inst: Instance, order: Sequence[int]) -> float:
    """Cost of the closed cycle through ``order`` (0 for fewer than two nodes)."""
    if len(order) < 2:
        return 0.0
    idx = np.asarray(order)
    return float(inst.dist[idx, np.roll(idx, -1)].sum())


def shortcut_cost(inst: Instance, t: Tour, a: ActiveSet | Iterable[int]) -> float:
    members = a.members if isinstance(a, ActiveSet) else set(a)
    return tour_cost(inst, [v for v in t.order if v in members])


def dist_to_set(inst: Instance, v: int, s: Iterable[int]) -> float:
    s = list(s)
    if not s:
        raise ValueError("distance to an empty set is undefined")
    return float(inst.dist[v, s].min())


def nearest_in_set(inst: Instance, v: int, s: Iterable[int]) -> int:
    """Member of ``s`` closest to ``v``; ties go to the lowest index."""
    s = sorted(s)
    if not s:
        raise ValueError("nearest member of an empty set is undefined")
    return s[int(np.argmin(inst.dist[v, s]))]


def subsets(items: Sequence[int], min_size: int = 0, max_size: int | None = None):
    max_size = len(items) if max_size is None else max_size
    for k in range(min_size, max_size + 1):
        yield from itertools.combinations(items, k)
