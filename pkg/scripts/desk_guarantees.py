"""Compare the algorithms against brute-force optima on small random instances."""

import argparse

import numpy as np

from aptsp.algorithms import SamplingPolicy, build_master_route_tour, sample_master_set
from aptsp.derand import derandomized_master_route_traced
from aptsp.evaluation import expected_sampled_mr, expected_tour_cost_exact, optimal_apriori_bruteforce
from aptsp.instance import Instance


def random_depot_instance(rng, n):
    p = rng.uniform(0.05, 0.95, n)
    p[0] = 1.0
    return Instance.from_points(rng.random((n, 2)), p, depot=0)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--instances", type=int, default=20)
    ap.add_argument("--n", type=int, default=8)
    ap.add_argument("--samples", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    policy = SamplingPolicy("power", 0.663)
    rows = []
    for _ in range(args.instances):
        inst = random_depot_instance(rng, args.n)
        opt = optimal_apriori_bruteforce(inst)[1]
        cache = {}
        total = 0.0
        for seed in range(args.samples):
            s = sample_master_set(inst, policy, seed)
            if s not in cache:
                cache[s] = expected_tour_cost_exact(inst, build_master_route_tour(inst, s, "exact")[0])
            total += cache[s]
        sampled = total / args.samples
        derand = expected_tour_cost_exact(inst, derandomized_master_route_traced(inst).tour)
        rows.append((sampled / opt, expected_sampled_mr(inst) / opt, derand / opt))
    arr = np.array(rows)
    for name, col in zip(("sampling", "E[MR(S)]", "derand"), arr.T):
        print(f"{name:<10} mean {col.mean():.4f}  max {col.max():.4f}")


if __name__ == "__main__":
    main()
