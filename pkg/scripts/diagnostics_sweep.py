"""Per-iteration convergence checks over many small gated runs.

Runs OMPR(l) on near-identity matrices whose exhaustive RIP constants admit a
step size, records every check, and writes one CSV.

Usage: python scripts/diagnostics_sweep.py [--runs 200] [--out results/diag_sweep.csv]
"""
import argparse
from collections import Counter
from pathlib import Path

import numpy as np

from ompr.algorithms import AlgorithmConfig, run_omprl
from ompr.diagnostics import (RipContext, admissible_step_sizes, diagnose_trace,
                              diagnostics_rows, write_diagnostics_csv)
from ompr.ensemble import MeasurementProblem, perturbed_identity, sparse_signal


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--runs", type=int, default=200)
    ap.add_argument("--n", type=int, default=12)
    ap.add_argument("--k", type=int, default=2)
    ap.add_argument("--eps", type=float, default=0.08)
    ap.add_argument("--out", default="results/diag_sweep.csv")
    args = ap.parse_args()
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    counts, runs, seed = Counter(), 0, 0
    with open(args.out, "w", newline="") as fh:
        write_diagnostics_csv(fh, [])
        while runs < args.runs:
            seed += 1
            A = perturbed_identity(args.n, args.eps, seed)
            l = 1 + seed % args.k
            rip = RipContext.exhaustive(A, args.k, l)
            window = admissible_step_sizes(rip)
            if window is None:
                continue
            x, sup = sparse_signal(args.n, args.k, seed)
            p = MeasurementProblem(A=A, b=A @ x, x_true=x, support=sup, seed=seed)
            cfg = AlgorithmConfig(k=args.k, l=l, eta=float(np.mean(window)), init="random",
                                  seed=seed, tol=0.0)
            _, trace = run_omprl(A, p.b, cfg)
            diags = diagnose_trace(p, cfg, trace, rip)
            write_diagnostics_csv(fh, diagnostics_rows(seed, diags), header=False)
            counts.update(c.status for d in diags for c in d.checks)
            runs += 1
    print(f"{runs} runs: hold={counts['hold']} fail={counts['fail']} skip={counts['skip']}")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
