"""Solve both factor-revealing LP families on a grid and certify each bound.

The default grid finishes in about a minute; ``--full`` adds the beta = 0.05
runs with 200 buckets, which take a few minutes more.
"""

import argparse
import time
from fractions import Fraction

from aptsp.lp.certificate import certificate_from_values, verify_certificate
from aptsp.lp.model import solve_lp
from aptsp.lp.mrr import MrrLpConfig, build_mrr_dual, build_mrr_lp
from aptsp.lp.sampling import SamplingLpConfig, build_sampling_dual, build_sampling_lp

SAMPLING = [("1/5", 50), ("1/10", 100)]
MRR = [("1/5", 25), ("1/10", 50), ("1/20", 100)]


def run(label, cfg, primal_model, dual_model):
    start = time.perf_counter()
    primal = solve_lp(primal_model, "highs")
    dual = solve_lp(dual_model, "highs")
    res = verify_certificate(certificate_from_values(cfg, dual.named(dual_model)))
    cert = f"{float(res.bound):.6f}" if res.ok and res.finite else "rejected"
    print(f"{label:<28} primal {primal.value:.10f}  1/primal {1 / primal.value:.6f}  "
          f"gap {abs(primal.value - dual.value):.1e}  certified {cert}  "
          f"({time.perf_counter() - start:.1f}s)")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--full", action="store_true", help="include the beta = 0.05 runs")
    ap.add_argument("--alpha", default="3/2")
    ap.add_argument("--sigma", default="663/1000")
    ap.add_argument("--a", type=int, default=9, help="master-route interval count")
    args = ap.parse_args()
    sampling = SAMPLING + ([("1/20", 200)] if args.full else [])
    mrr = MRR + ([("1/20", 200)] if args.full else [])
    for beta, n in sampling:
        cfg = SamplingLpConfig(Fraction(args.alpha), Fraction(args.sigma), Fraction(beta), n)
        run(f"sampling beta={beta} N={n}", cfg, build_sampling_lp(cfg), build_sampling_dual(cfg))
    for beta, n in mrr:
        cfg = MrrLpConfig(Fraction(beta), n, args.a)
        run(f"mrr beta={beta} N={n} a={args.a}", cfg, build_mrr_lp(cfg), build_mrr_dual(cfg))


if __name__ == "__main__":
    main()
