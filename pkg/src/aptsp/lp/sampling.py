"""Bucketed LP whose optimum bounds the sampling algorithm's ratio, and its dual."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .exact import fraction_str, to_fraction
from .model import LpModel

DELTA_SERIES_RTOL = 1e-12


def _exact(value) -> Fraction:
    # floats are read as the decimal literal they print as (0.663 -> 663/1000)
    if isinstance(value, float):
        return Fraction(repr(value))
    return to_fraction(value)


@dataclass(frozen=True)
class SamplingLpConfig:
    """TSP guarantee ``alpha``, sampling exponent ``sigma``, bucket width ``beta``, ``n_buckets`` buckets.

    Parameters are kept as exact rationals so certificates can be checked exactly.
    """

    alpha: Fraction
    sigma: Fraction
    beta: Fraction
    n_buckets: int

    def __post_init__(self):
        for name in ("alpha", "sigma", "beta"):
            object.__setattr__(self, name, _exact(getattr(self, name)))
        object.__setattr__(self, "n_buckets", int(self.n_buckets))
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if not 0 < self.sigma <= 1:
            raise ValueError("sigma must lie in (0, 1]")
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.n_buckets < 1:
            raise ValueError("need at least one bucket")

    @property
    def sb(self) -> float:
        return float(self.sigma * self.beta)

    @property
    def deltas(self) -> tuple[float, float]:
        return compute_delta_terms(self)

    def to_json(self) -> dict:
        return {"alpha": fraction_str(self.alpha), "sigma": fraction_str(self.sigma),
                "beta": fraction_str(self.beta), "n_buckets": self.n_buckets}

    @classmethod
    def from_json(cls, data: dict) -> "SamplingLpConfig":
        return cls(to_fraction(data["alpha"]), to_fraction(data["sigma"]),
                   to_fraction(data["beta"]), int(data["n_buckets"]))


def compute_delta_terms(cfg: SamplingLpConfig) -> tuple[float, float]:
    """Closed-form error terms for truncating the bucket sums at ``n_buckets``."""
    sb = cfg.sb
    beta, alpha, n = float(cfg.beta), float(cfg.alpha), cfg.n_buckets
    tail = math.exp(-n * sb)  # e^{-N sigma beta}
    geo = tail / math.expm1(sb)  # 1 / (e^{N sb} (e^{sb} - 1))
    delta1 = 4.0 * beta * geo
    q = math.exp(-sb)
    delta2 = (alpha + 2.0 * beta * geo) * tail / math.expm1(-sb) ** 2 * (1.0 + n - q * n)
    return delta1, delta2


def tail_sum_closed(n: int, q: float) -> float:
    """sum_{k > n} k q^(k-1) in closed form, for 0 <= q < 1."""
    return q**n * (1.0 + n - q * n) / (1.0 - q) ** 2


def tail_sum_series(n: int, q: float, terms: int) -> float:
    k = np.arange(n + 1, n + 1 + terms, dtype=float)
    return math.fsum((k * np.exp((k - 1.0) * math.log(q))).tolist())


def delta_terms_series(cfg: SamplingLpConfig, terms: int | None = None) -> tuple[float, float]:
    """The same error terms from truncated geometric series."""
    sb = cfg.sb
    beta, alpha, n = float(cfg.beta), float(cfg.alpha), cfg.n_buckets
    if terms is None:
        terms = int(math.ceil(50.0 / sb)) + 10
    j = np.arange(n + 1, n + 1 + terms, dtype=float)
    delta1 = 4.0 * beta * math.fsum(np.exp(-j * sb).tolist())
    delta2 = (alpha + delta1 / 2.0) * tail_sum_series(n, math.exp(-sb), terms)
    return delta1, delta2


def check_delta_terms(cfg: SamplingLpConfig) -> tuple[float, float]:
    closed = compute_delta_terms(cfg)
    series = delta_terms_series(cfg)
    for c, s in zip(closed, series):
        if abs(c - s) > DELTA_SERIES_RTOL * max(abs(c), abs(s), 1e-300):
            raise AssertionError(f"delta closed form {c!r} disagrees with series {s!r}")
    return closed


def master_coefficients(cfg: SamplingLpConfig) -> tuple[np.ndarray, np.ndarray]:
    """Float coefficients of B_k and M_{i,j} (dense upper triangle) in the master row."""
    n, sb, beta = cfg.n_buckets, cfg.sb, float(cfg.beta)
    d1, d2 = compute_delta_terms(cfg)
    k = np.arange(n + 1)
    b_coef = (float(cfg.alpha) + d1) * np.exp(-(k - 1) * sb)
    if n >= 1:
        b_coef[1] += d2
    i, j = np.meshgrid(k, k, indexing="ij")
    m_coef = 4.0 * beta * np.exp(-(i + j - 1) * sb)
    return b_coef, m_coef


def objective_coefficients(beta, n: int) -> np.ndarray:
    return np.exp(-(np.arange(n + 1) + 0.5) * float(beta))


def build_sampling_lp(cfg: SamplingLpConfig, check_deltas: bool = True) -> LpModel:
    n = cfg.n_buckets
    if check_deltas:
        check_delta_terms(cfg)
    b_coef, m_coef = master_coefficients(cfg)
    obj = objective_coefficients(cfg.beta, n)
    lp = LpModel("min")
    b = [lp.add_var(f"B_{i}", obj[i]) for i in range(n + 1)]
    m = {}
    for j in range(n + 1):
        for i in range(j + 1):
            m[i, j] = lp.add_var(f"M_{i}_{j}")
    master = {b[k]: b_coef[k] for k in range(n + 1)}
    master.update({m[i, j]: m_coef[i, j] for (i, j) in m})
    lp.add_row(master, ">=", float(1 / cfg.sigma**2), "master")
    for i in range(1, n + 1):
        for j in range(i, n + 1 - i):
            coeffs = {b[i]: 1.0, b[j]: 1.0, b[i + j]: -1.0} if i != j else {b[i]: 2.0, b[2 * i]: -1.0}
            lp.add_row(coeffs, ">=", 0.0, f"tri_{i}_{j}")
    for (i, j), col in m.items():
        lp.add_row({b[i]: 1.0, col: -1.0}, ">=", 0.0, f"mv_{i}_{j}")
        lp.add_row({b[j]: 1.0, col: -1.0}, ">=", 0.0, f"mw_{i}_{j}")
    return lp


def build_sampling_dual(cfg: SamplingLpConfig, check_deltas: bool = True) -> LpModel:
    """Dual LP written row by row from its displayed form."""
    n = cfg.n_buckets
    if check_deltas:
        check_delta_terms(cfg)
    sb, beta, alpha = cfg.sb, float(cfg.beta), float(cfg.alpha)
    d1, d2 = compute_delta_terms(cfg)
    lp = LpModel("max")
    y = lp.add_var("y", float(1 / cfg.sigma**2))
    x = {}
    for i in range(1, n + 1):
        for j in range(i, n + 1 - i):
            x[i, j] = lp.add_var(f"x_{i}_{j}")
    v, w = {}, {}
    for j in range(n + 1):
        for i in range(j + 1):
            v[i, j] = lp.add_var(f"v_{i}_{j}")
            w[i, j] = lp.add_var(f"w_{i}_{j}")
    for (i, j) in v:
        lp.add_row([(y, 4.0 * beta * math.exp(-(i + j - 1) * sb)),
                    (v[i, j], -1.0), (w[i, j], -1.0)], "<=", 0.0, f"m_{i}_{j}")
    for k in range(n + 1):
        terms = [(y, (alpha + d1) * math.exp(-(k - 1) * sb))]
        terms += [(v[k, j], 1.0) for j in range(k, n + 1)]
        terms += [(w[j, k], 1.0) for j in range(k + 1)]
        if k == 1:
            terms.append((y, d2))
        if k > 0:
            terms += [(x[i, k], 1.0) for i in range(1, min(k, n - k) + 1)]
            terms += [(x[k, i], 1.0) for i in range(k, n - k + 1)]
            terms += [(x[i, k - i], -1.0) for i in range(1, k // 2 + 1)]
        lp.add_row(terms, "<=", math.exp(-(k + 0.5) * beta), f"k_{k}")
    return lp


def bound_from_primal(value: float) -> float:
    if not value > 0:
        raise ValueError(f"primal value must be positive, got {value}")
    return 1.0 / value
