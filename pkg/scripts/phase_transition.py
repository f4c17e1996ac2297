"""Phase-transition grid for OMPR and OMP at desk scale.

Usage: python scripts/phase_transition.py [--n 200] [--trials 20] [--out results/phase]
"""
import argparse

from ompr.harness import ExperimentSpec, run_phase_transition


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=200)
    ap.add_argument("--trials", type=int, default=20)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="results/phase")
    args = ap.parse_args()
    grid = [round(0.1 * i, 2) for i in range(1, 10)]
    spec = ExperimentSpec(kind="phase_transition", n=args.n, delta=grid,
                          rho=[round(g / 2, 3) for g in grid], algorithms=["ompr", "omp"],
                          trials_per_cell=args.trials, base_seed=args.seed,
                          threads=args.threads, output_dir=args.out)
    result = run_phase_transition(spec)
    for algo in ("ompr", "omp"):
        probs = [c.success_prob(algo) for c in result.cells]
        print(f"{algo}: mean success over grid {sum(probs) / len(probs):.3f}")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
