"""Exact OMPR against OMPR-Hash as the dictionary grows.

Usage: python scripts/lsh_benchmark.py [--ns 1000,10000,100000] [--out results/lsh]
"""
import argparse

from ompr.harness import ExperimentSpec, run_lsh_benchmark


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--m", type=int, default=500)
    ap.add_argument("--k", type=int, default=50)
    ap.add_argument("--ns", default="1000,10000,100000")
    ap.add_argument("--trials", type=int, default=1)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="results/lsh")
    args = ap.parse_args()
    ns = [int(v) for v in args.ns.split(",")]
    spec = ExperimentSpec(kind="lsh_benchmark", m=args.m, k=args.k, ns=ns,
                          algorithms=["ompr", "ompr_hash", "iht_newton", "iht_newton_half"],
                          trials_per_cell=args.trials, base_seed=args.seed,
                          record_timing=True, output_dir=args.out)
    result = run_lsh_benchmark(spec)
    for n in ns:
        parts = [f"{a} resid={result.mean(n, a, 'resid'):.4f} "
                 f"time={result.mean(n, a, 'time_s'):.3f}s"
                 for a in ("ompr", "ompr_hash")]
        print(f"n={n}: " + ", ".join(parts))
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
