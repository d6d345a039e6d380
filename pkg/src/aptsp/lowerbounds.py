"""Two lower-bound instance families and their analytic ratios."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.optimize import minimize_scalar

from .evaluation import expected_tour_cost_exact
from .instance import Instance, Tour

GAMMA_RANGE = (1.0, 2.0)
GAMMA_STEP = 1e-3
SIGMA_TOL = 1e-10


@dataclass(frozen=True)
class SamplingLbParams:
    """Plateau family: gamma in [1, 2], activation p with gamma/p integral, n customers."""

    gamma: float
    p: float
    n: int

    def __post_init__(self):
        lo, hi = GAMMA_RANGE
        if not lo <= self.gamma <= hi:
            raise ValueError(f"gamma must lie in [{lo}, {hi}], got {self.gamma}")
        if not 0 < self.p <= 1:
            raise ValueError(f"p must lie in (0, 1], got {self.p}")
        if self.n < 3:
            raise ValueError("need at least 3 customers")
        ratio = self.gamma / self.p
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
            raise ValueError(f"gamma/p = {ratio} must be an integer")

    @property
    def plateau(self) -> int:
        return int(round(self.gamma / self.p))

    def hop_length(self, k: int) -> float:
        """Unscaled length of a hop over k positions: flat up to the plateau, then linear."""
        return float(max(self.plateau, k))

    @classmethod
    def from_plateau(cls, gamma: float, plateau: int, n: int) -> "SamplingLbParams":
        """Choose p = gamma / plateau so the integrality invariant holds exactly."""
        return cls(gamma, gamma / plateau, n)


@dataclass(frozen=True)
class MrrLbParams:
    """Group family: n groups of m co-located customers around a depot."""

    n: int
    m: int

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise ValueError("n and m must be positive")

    @property
    def q(self) -> float:
        """P[a group has an active member] = 1 - (1 - 1/(2m))^m."""
        return -math.expm1(self.m * math.log1p(-0.5 / self.m))


def gen_sampling_lb_instance(params: SamplingLbParams) -> Instance:
    n = params.n
    idx = np.arange(n)
    hops = np.abs(idx[:, None] - idx[None, :])
    hops = np.minimum(hops, n - hops)
    dist = np.maximum(hops, params.plateau).astype(float) / n
    np.fill_diagonal(dist, 0.0)
    p = np.full(n, params.p)
    p[0] = 1.0
    return Instance(dist, p, 0)


def opt_upper_bound_sampling_lb(params: SamplingLbParams) -> tuple[float, float]:
    """Exact expected cost of the identity tour, and the closed form gamma + (1-p)^(gamma/p)."""
    inst = gen_sampling_lb_instance(params)
    exact = expected_tour_cost_exact(inst, Tour(tuple(range(params.n))))
    closed = params.gamma + (1.0 - params.p) ** params.plateau
    return exact, closed


def weighted_hop_sum_closed(params: SamplingLbParams, beta: float, k: int) -> float:
    """Closed form of sum_{i=1}^k (beta p)^2 (1 - beta p)^(i-1) * hop_length(i), for k >= plateau.

    Requires 0 < beta p <= 1; at beta p = 1 the power 0^0 counts as 1.
    """
    bp = beta * params.p
    if not 0 < bp <= 1:
        raise ValueError("need 0 < beta * p <= 1")
    if k < params.plateau:
        raise ValueError("k must be at least the plateau length")
    keep = 1.0 - bp
    return beta * params.gamma + keep ** params.plateau - (1.0 + bp * k) * keep ** k


def sampling_lb_ratio(alpha: float, gamma: float, sigma: float) -> float:
    sg = sigma * gamma
    num = alpha * (sg + math.exp(-sg)) + 2.0 * gamma + math.exp(-2.0 * sg) / sigma
    return num / (gamma + math.exp(-gamma))


def _sigma_equation(sigma: float, alpha: float, gamma: float) -> float:
    sg = sigma * gamma
    return sigma * sigma * alpha * gamma * (math.exp(2 * sg) - math.exp(sg)) - (1.0 + 2.0 * sg)


def optimize_sigma(alpha: float, gamma: float) -> float:
    """Stationary point of the ratio in sigma, by bisection."""
    if alpha <= 0 or gamma <= 0:
        raise ValueError("alpha and gamma must be positive")
    lo, hi = 0.0, 1.0
    while _sigma_equation(hi, alpha, gamma) <= 0:
        hi *= 2.0
    while hi - lo > SIGMA_TOL:
        mid = 0.5 * (lo + hi)
        if _sigma_equation(mid, alpha, gamma) > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def _min_ratio(alpha: float, gamma: float) -> float:
    return sampling_lb_ratio(alpha, gamma, optimize_sigma(alpha, gamma))


def optimize_gamma_sigma(alpha: float) -> tuple[float, float, float]:
    """gamma maximizing the sigma-minimized ratio, with that sigma and ratio."""
    if alpha < 1:
        raise ValueError("alpha must be at least 1")
    lo, hi = GAMMA_RANGE
    grid = np.arange(lo, hi + GAMMA_STEP / 2, GAMMA_STEP)
    values = [_min_ratio(alpha, g) for g in grid]
    best = int(np.argmax(values))
    left, right = grid[max(best - 1, 0)], grid[min(best + 1, len(grid) - 1)]
    gamma = float(grid[best])
    if right > left:
        res = minimize_scalar(lambda g: -_min_ratio(alpha, g), bounds=(left, right),
                              method="bounded", options={"xatol": 1e-10})
        if -res.fun >= values[best]:
            gamma = float(res.x)
    sigma = optimize_sigma(alpha, gamma)
    return gamma, sigma, sampling_lb_ratio(alpha, gamma, sigma)


def gen_mrr_lb_instance(params: MrrLbParams) -> Instance:
    size = 1 + params.n * params.m
    group = np.concatenate([[-1], np.repeat(np.arange(params.n), params.m)])
    dist = (group[:, None] != group[None, :]).astype(float)
    p = np.full(size, 1.0 / (2 * params.m))
    p[0] = 1.0
    return Instance(dist, p, 0)


def mrr_lb_ratio(params: MrrLbParams) -> float:
    """Best master-route cost n over the upper bound n*q + 1 on the optimum."""
    return params.n / (params.n * params.q + 1.0)


def mrr_lb_limit() -> float:
    return 1.0 / -math.expm1(-0.5)


def alpha_from_text(text: str) -> float:
    """Parse ``1.5`` or ``4/3``."""
    return float(Fraction(text.strip()))
