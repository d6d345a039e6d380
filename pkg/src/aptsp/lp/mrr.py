"""Bucket-interval LP whose optimum bounds the master route ratio, and its dual."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .exact import fraction_str, to_fraction
from .model import LpModel
from .sampling import _exact, objective_coefficients


def a_name(k: int) -> str:
    """Interval variable name; negative indices are written ``A_m3`` for -3."""
    return f"A_{k}" if k >= 0 else f"A_m{-k}"


@dataclass(frozen=True)
class MrrLpConfig:
    """Bucket width ``beta``, ``n_buckets`` buckets, odd interval width ``a`` and per-bucket offsets.

    ``offsets[i - 1]`` is the offset used for bucket ``i``; by default ``i mod a``.
    """

    beta: Fraction
    n_buckets: int
    a: int
    offsets: tuple[int, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "beta", _exact(self.beta))
        object.__setattr__(self, "n_buckets", int(self.n_buckets))
        object.__setattr__(self, "a", int(self.a))
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.n_buckets < 1:
            raise ValueError("need at least one bucket")
        if self.a < 1 or self.a % 2 == 0:
            raise ValueError(f"interval width must be a positive odd integer, got {self.a}")
        offs = self.offsets
        if offs is None:
            offs = tuple(i % self.a for i in range(1, self.n_buckets + 1))
        offs = tuple(int(h) for h in offs)
        if len(offs) != self.n_buckets:
            raise ValueError("need one offset per bucket 1..N")
        if any(not 0 <= h < self.a for h in offs):
            raise ValueError("offsets must lie in 0..a-1")
        object.__setattr__(self, "offsets", offs)

    def offset(self, i: int) -> int:
        return self.offsets[i - 1]

    def n_pairs(self, i: int) -> int:
        """Number of interval pairs for bucket ``i``: ceil((h_i + i + 1) / a)."""
        return -(-(self.offset(i) + i + 1) // self.a)

    def pair_indices(self, i: int, j: int) -> tuple[int, int]:
        """Interval indices bounding M_{j,i}: ((j-1)a - h_i, i - ja + h_i)."""
        h = self.offset(i)
        return (j - 1) * self.a - h, i - j * self.a + h

    def interval(self, k: int) -> range:
        """Buckets summed by interval ``k``."""
        return range(max(k, 0), min(k + self.a, self.n_buckets) + 1)

    def to_json(self) -> dict:
        out = {"beta": fraction_str(self.beta), "n_buckets": self.n_buckets, "a": self.a}
        default = tuple(i % self.a for i in range(1, self.n_buckets + 1))
        if self.offsets != default:
            out["offsets"] = list(self.offsets)
        return out

    @classmethod
    def from_json(cls, data: dict) -> "MrrLpConfig":
        offs = data.get("offsets")
        return cls(to_fraction(data["beta"]), int(data["n_buckets"]), int(data["a"]),
                   tuple(offs) if offs is not None else None)


def build_mrr_lp(cfg: MrrLpConfig) -> LpModel:
    n, a, beta = cfg.n_buckets, cfg.a, float(cfg.beta)
    obj = objective_coefficients(cfg.beta, n)
    lp = LpModel("min")
    b = [lp.add_var(f"B_{i}", obj[i]) for i in range(n + 1)]
    A = {k: lp.add_var(a_name(k), nonneg=False) for k in range(-a, n + 1)}
    m = {}
    for i in range(1, n + 1):
        for j in range(1, cfg.n_pairs(i) + 1):
            m[j, i] = lp.add_var(f"M_{j}_{i}")
    for i in range(2, n + 1):
        lp.add_row({b[1]: float(i), b[i]: -1.0}, ">=", 0.0, f"sub_{i}")
    for i in range(1, n + 1):
        coeffs = {b[i]: 1.0}
        for j in range(1, cfg.n_pairs(i) + 1):
            coeffs[m[j, i]] = 2.0 * beta
        lp.add_row(coeffs, ">=", i * beta * beta, f"mr_{i}")
    for (j, i), col in m.items():
        lo, hi = cfg.pair_indices(i, j)
        lp.add_row({A[lo]: 1.0, col: -1.0}, ">=", 0.0, f"lo_{j}_{i}")
        lp.add_row({A[hi]: 1.0, col: -1.0}, ">=", 0.0, f"hi_{j}_{i}")
    for k in range(-a, n + 1):
        coeffs = {b[ell]: 1.0 for ell in cfg.interval(k)}
        coeffs[A[k]] = -1.0
        lp.add_row(coeffs, "=", 0.0, f"int_{a_name(k)[2:]}")
    return lp


def build_mrr_dual(cfg: MrrLpConfig) -> LpModel:
    """Dual LP written row by row from its displayed form."""
    n, a, beta = cfg.n_buckets, cfg.a, float(cfg.beta)
    lp = LpModel("max")
    x = {i: lp.add_var(f"x_{i}") for i in range(2, n + 1)}
    y = {i: lp.add_var(f"y_{i}", i * beta * beta) for i in range(1, n + 1)}
    z = {k: lp.add_var("z_" + a_name(k)[2:], nonneg=False) for k in range(-a, n + 1)}
    v, w = {}, {}
    for i in range(1, n + 1):
        for j in range(1, cfg.n_pairs(i) + 1):
            v[j, i] = lp.add_var(f"v_{j}_{i}")
            w[j, i] = lp.add_var(f"w_{j}_{i}")
    for i in range(n + 1):
        terms = [(y[i], 1.0)] if i >= 1 else []
        terms += [(z[k], 1.0) for k in range(i - a, i + 1)]
        if i == 1:
            terms += [(x[j], float(j)) for j in range(2, n + 1)]
        if i >= 2:
            terms.append((x[i], -1.0))
        lp.add_row(terms, "<=", math.exp(-(i + 0.5) * beta), f"b_{i}")
    for (j, i) in v:
        lp.add_row([(y[i], 2.0 * beta), (v[j, i], -1.0), (w[j, i], -1.0)], "<=", 0.0,
                   f"m_{j}_{i}")
    hits: dict[int, list] = {k: [] for k in range(-a, n + 1)}
    for (j, i) in v:
        lo, hi = cfg.pair_indices(i, j)
        hits[lo].append((v[j, i], 1.0))
        hits[hi].append((w[j, i], 1.0))
    for k in range(-a, n + 1):
        lp.add_row(hits[k] + [(z[k], -1.0)], "=", 0.0, f"z_{a_name(k)[2:]}")
    return lp
