"""Command line entry point: ``python -m ompr <command> [flags]``.

Commands: ``phase``, ``noise``, ``lsh``, ``run``, ``diag``.
Exit codes: 0 success, 1 configuration error, 2 I/O error.
"""
from __future__ import annotations

import argparse
import dataclasses
import sys
from collections import Counter
from importlib import resources
from pathlib import Path

from .diagnostics import RipContext, diagnose_trace, diagnostics_rows, write_diagnostics_csv
from .ensemble import load_problem
from .errors import BadArguments
from .harness import (REGISTRY, AlgorithmChoice, ConfigError, ExperimentSpec, build_problem,
                      ensure_writable, load_spec, run_algorithm, run_lsh_benchmark,
                      run_noise_sweep, run_phase_transition)

SAMPLE_PROBLEM = "sample_problem.bin"
COMMAND_KIND = {"phase": "phase_transition", "noise": "noise_sweep", "lsh": "lsh_benchmark",
                "run": "single_run", "diag": "single_run"}


def default_spec(command: str) -> ExperimentSpec:
    """Desk-scale settings used when no ``--config`` is given."""
    if command == "phase":
        return ExperimentSpec(kind="phase_transition", n=200,
                              delta=[0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9],
                              rho=[0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45],
                              algorithms=["ompr", "omp"], trials_per_cell=20)
    if command == "noise":
        return ExperimentSpec(kind="noise_sweep", m=200, n=3000,
                              algorithms=["ompr", "iht_newton"], trials_per_cell=20)
    if command == "lsh":
        return ExperimentSpec(kind="lsh_benchmark", m=500, k=50, ns=[1000, 10000, 100000],
                              algorithms=["ompr", "ompr_hash", "iht_newton", "iht_newton_half"],
                              trials_per_cell=1)
    if command == "diag":
        return ExperimentSpec(kind="single_run", matrix="perturbed_identity", n=12, k=2, l=1,
                              eta=0.9, eps=0.1,
                              algorithms=[{"name": "omprl", "init": "random"}])
    return ExperimentSpec(kind="single_run", algorithms=["ompr", "omp"])


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ompr", description="Sparse recovery experiments.")
    parser.add_argument("command", choices=sorted(COMMAND_KIND))
    parser.add_argument("--config", help="JSON experiment spec")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--seed", type=int, help="base seed (trial seed for run/diag)")
    parser.add_argument("--threads", type=int, help="worker threads")
    parser.add_argument("--algo", help="comma-separated algorithm names")
    return parser


def _resolve(args) -> ExperimentSpec:
    spec = load_spec(args.config) if args.config else default_spec(args.command)
    if args.config and spec.kind != COMMAND_KIND[args.command]:
        if not (args.command in ("run", "diag") and spec.kind != "lsh_benchmark"):
            raise ConfigError(f"config kind {spec.kind!r} does not match command {args.command!r}")
    updates = {}
    if args.out is not None:
        updates["output_dir"] = args.out
    if args.seed is not None:
        updates["base_seed"] = args.seed
    if args.threads is not None:
        updates["threads"] = args.threads
    if args.algo is not None:
        names = [a.strip() for a in args.algo.split(",") if a.strip()]
        unknown = [a for a in names if a not in REGISTRY]
        if unknown:
            raise ConfigError(f"unknown algorithm(s) {unknown}; choose from {sorted(REGISTRY)}")
        updates["algorithms"] = [AlgorithmChoice(a, l=spec.l, eta=spec.eta) for a in names]
    return dataclasses.replace(spec, **updates)


def _single_problem(spec: ExperimentSpec, args):
    """Problem for run/diag: regenerated from the spec, or the bundled sample."""
    if args.config:
        if spec.kind != "single_run":
            spec = dataclasses.replace(spec, kind="single_run")
        spec.validate()
        return build_problem(spec, spec.m, spec.n, spec.k, spec.base_seed, spec.noise_level)
    if args.command == "diag":
        spec.validate()
        return build_problem(spec, spec.n, spec.n, spec.k, spec.base_seed)
    with resources.as_file(resources.files("ompr.data") / SAMPLE_PROBLEM) as path:
        return load_problem(path)


def _cmd_run(spec: ExperimentSpec, args) -> int:
    problem = _single_problem(spec, args)
    k = len(problem.support)
    lines = []
    for choice in spec.algorithms:
        if REGISTRY[choice.name].needs_index:
            raise ConfigError("ompr_hash is only available through the lsh command")
        state, trace = run_algorithm(choice, problem.A, problem.b, k, seed=spec.base_seed)
        rel = float(((state.x - problem.x_true) ** 2).sum() ** 0.5
                    / (problem.x_true ** 2).sum() ** 0.5)
        resid = float((state.residual ** 2).sum() ** 0.5)
        lines.append(f"{choice.label} rel_err={rel!r} resid={resid!r} "
                     f"iterations={state.iteration} status={trace.status.value}")
    print("\n".join(lines))
    if args.out is not None:
        ensure_writable(args.out)
        (Path(args.out) / "run.txt").write_text("\n".join(lines) + "\n")
    return 0


def _cmd_diag(spec: ExperimentSpec, args) -> int:
    problem = _single_problem(spec, args)
    k = len(problem.support)
    choice = spec.algorithms[0]
    cfg = choice.config(k, seed=spec.base_seed)
    if cfg.family not in ("ompr_l", "two_stage"):
        raise ConfigError(f"diag supports OMPR(l) and two-stage methods, not {choice.name}")
    _, trace = run_algorithm(choice, problem.A, problem.b, k, seed=spec.base_seed)
    rip = RipContext.exhaustive(problem.A, k, cfg.l)
    diags = diagnose_trace(problem, cfg, trace, rip)
    ensure_writable(spec.output_dir)
    path = Path(spec.output_dir) / "diag.csv"
    with open(path, "w", newline="") as fh:
        write_diagnostics_csv(fh, diagnostics_rows(spec.base_seed, diags))
    counts = Counter(c.status for d in diags for c in d.checks)
    print(f"{choice.label}: {len(diags)} iterations checked, hold={counts['hold']} "
          f"fail={counts['fail']} skip={counts['skip']} -> {path}")
    return 0


def cli_main(argv=None) -> int:
    try:
        args = _parser().parse_args(argv)
        spec = _resolve(args)
        if args.command in ("phase", "noise", "lsh"):
            ensure_writable(spec.output_dir)
            {"phase": run_phase_transition, "noise": run_noise_sweep,
             "lsh": run_lsh_benchmark}[args.command](spec)
            print(f"wrote {args.command} results to {spec.output_dir}")
            return 0
        return (_cmd_run if args.command == "run" else _cmd_diag)(spec, args)
    except (ConfigError, BadArguments) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        name = getattr(exc, "filename", None)
        detail = f"{name}: {exc.strerror}" if name and exc.strerror else str(exc)
        print(f"io error: {detail}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli_main())
