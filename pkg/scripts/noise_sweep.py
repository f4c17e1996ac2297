"""Residual norm versus sparsity and noise level for OMPR and IHT-Newton.

Usage: python scripts/noise_sweep.py [--trials 20] [--out results/noise]
"""
import argparse

from ompr.harness import ExperimentSpec, run_noise_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--m", type=int, default=200)
    ap.add_argument("--n", type=int, default=3000)
    ap.add_argument("--trials", type=int, default=20)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="results/noise")
    args = ap.parse_args()
    spec = ExperimentSpec(kind="noise_sweep", m=args.m, n=args.n, ks=[10, 30, 50],
                          noise_levels=[0.0, 0.05, 0.1, 0.2],
                          algorithms=["ompr", "iht_newton", "iht_newton_half"],
                          trials_per_cell=args.trials, base_seed=args.seed,
                          threads=args.threads, output_dir=args.out)
    result = run_noise_sweep(spec)
    print("k  level  mean_diff(ompr - iht_newton)  95% CI")
    for k, level, _, _, mean, _, lo, hi, _ in result.paired("ompr", "iht_newton"):
        print(f"{k:<3d} {level:<6g} {mean:+.4f}  [{lo:+.4f}, {hi:+.4f}]")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
