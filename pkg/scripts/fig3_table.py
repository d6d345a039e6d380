"""Print the (gamma*, sigma*, ratio) table of the sampling lower-bound family."""

import argparse

from aptsp.lowerbounds import alpha_from_text, optimize_gamma_sigma


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--alpha", action="append", default=None,
                    help="master-tour approximation factor (repeatable, fractions allowed)")
    args = ap.parse_args()
    alphas = [alpha_from_text(a) for a in args.alpha] if args.alpha else [1.0, 4 / 3, 1.4999]
    print(f"{'alpha':>8} {'gamma*':>8} {'sigma*':>8} {'ratio':>8}")
    for alpha in alphas:
        gamma, sigma, ratio = optimize_gamma_sigma(alpha)
        print(f"{alpha:8.4f} {gamma:8.4f} {sigma:8.4f} {ratio:8.4f}")


if __name__ == "__main__":
    main()
