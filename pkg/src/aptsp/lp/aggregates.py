"""Hop aggregates of a tour, their buckets and bucket intervals.

These map a concrete instance into the variables of the bound LPs and let
tests check that the LP constraints are valid relaxations.
"""

from __future__ import annotations

import numpy as np

from ..instance import Instance


def hop_aggregates(inst: Instance, order, p: float, k_max: int) -> np.ndarray:
    """``out[k] = p^2 * sum_j c(v_j, v_{j+k})`` for k = 0..k_max.

    ``order`` lists the tour starting at the depot; positions outside the tour
    refer to the depot. ``out[0]`` is 0.
    """
    order = np.asarray(order, dtype=int)
    n = len(order)
    d = inst.dist
    out = np.zeros(k_max + 1)
    # for k >= n every pair has at most one customer inside the tour
    far = 2.0 * d[order[0], order].sum()
    for k in range(1, k_max + 1):
        if k >= n:
            out[k] = far
            continue
        j = np.arange(-k, n)
        a = np.where((j >= 0) & (j < n), order[np.clip(j, 0, n - 1)], order[0])
        jk = j + k
        b = np.where((jk >= 0) & (jk < n), order[np.clip(jk, 0, n - 1)], order[0])
        out[k] = d[a, b].sum()
    return p * p * out


def bucketize(hops: np.ndarray, width: int, n_buckets: int) -> np.ndarray:
    """Buckets of ``width`` (odd) consecutive aggregates centred on multiples of ``width``."""
    if width < 1 or width % 2 == 0:
        raise ValueError("bucket width must be a positive odd integer")
    half = (width - 1) // 2
    need = n_buckets * width + half
    if len(hops) <= need:
        raise ValueError(f"need aggregates up to index {need}")
    out = np.zeros(n_buckets + 1)
    for i in range(n_buckets + 1):
        lo = max(1, i * width - half)
        out[i] = hops[lo:i * width + half + 1].sum()
    return out


def bucket_intervals(buckets: np.ndarray, a: int) -> dict[int, float]:
    """Interval sums over ``a + 1`` consecutive buckets, clipped to the bucket range."""
    n = len(buckets) - 1
    return {k: float(buckets[max(k, 0):min(k + a, n) + 1].sum()) for k in range(-a, n + 1)}


def _min_sums(hops: np.ndarray, k_max: int) -> np.ndarray:
    """``s[k] = sum_{i=1}^{k-1} min(C_i, C_{k-i})``."""
    s = np.zeros(k_max + 1)
    for k in range(2, k_max + 1):
        s[k] = np.minimum(hops[1:k], hops[k - 1:0:-1]).sum()
    return s


def sampling_master_lhs(hops: np.ndarray, p: float, sigma: float, alpha: float) -> float:
    """Truncated left side of the per-instance sampling constraint."""
    k_max = len(hops) - 1
    k = np.arange(1, k_max + 1)
    weight = (1.0 - sigma * p) ** (k - 1)
    mins = _min_sums(hops, k_max)[1:]
    return float(np.sum(weight * (alpha * hops[1:] + 2.0 * p * mins)))


def mrr_row_lhs(hops: np.ndarray, p: float, k_max: int) -> np.ndarray:
    """``C_k + 2p sum_i min(C_i, C_{k-i})`` for k = 0..k_max (entry 0 unused)."""
    return hops[:k_max + 1] + 2.0 * p * _min_sums(hops, k_max)


def sampling_lp_master_value(buckets: np.ndarray, cfg) -> float:
    """Master-row left side of the Sampling LP at B = buckets and M = min(B_i, B_j)."""
    from .sampling import master_coefficients

    b_coef, m_coef = master_coefficients(cfg)
    mins = np.minimum(buckets[:, None], buckets[None, :])
    upper = np.triu(np.ones_like(mins, dtype=bool))
    return float(b_coef @ buckets + np.sum(m_coef[upper] * mins[upper]))


def mrr_lp_row_values(buckets: np.ndarray, cfg, width: int) -> np.ndarray:
    """``B_i + 2 beta sum_j min(A_lo, A_hi)`` per bucket, with beta taken as ``width * p``."""
    intervals = bucket_intervals(buckets, cfg.a)
    beta = float(cfg.beta)
    out = np.zeros(cfg.n_buckets + 1)
    for i in range(1, cfg.n_buckets + 1):
        total = 0.0
        for j in range(1, cfg.n_pairs(i) + 1):
            lo, hi = cfg.pair_indices(i, j)
            total += min(intervals[lo], intervals[hi])
        out[i] = buckets[i] + 2.0 * beta * total
    return out
