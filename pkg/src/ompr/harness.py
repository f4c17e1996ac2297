"""Experiment harness: phase-transition grids, noise sweeps, LSH benchmarks.

Every trial draws its problem from ``derive_seed(base_seed, cell, trial)``,
so results depend only on a trial's position in the grid, never on thread
scheduling. Aggregation walks cells and trials in canonical order.

CSV outputs are byte-identical across repeated runs and thread counts. Wall
times are inherently not, so they are only measured when ``record_timing``
is set; otherwise time columns hold ``nan``.
"""
from __future__ import annotations

import csv
import dataclasses
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import algorithms as alg
from .algorithms import AlgorithmConfig
from .ensemble import (MeasurementProblem, add_noise, derive_seed, make_problem,
                       perturbed_identity, sparse_signal)
from .errors import BadArguments, RecoveryError
from .lsh import build_index, default_params, run_ompr_hash

KINDS = ("phase_transition", "noise_sweep", "lsh_benchmark", "single_run")
MATRICES = ("gaussian", "perturbed_identity")
DEFAULT_NOISE_KS = (10, 30, 50)
DEFAULT_NOISE_LEVELS = (0.0, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5)


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


# -- algorithm registry ----------------------------------------------------------

@dataclass(frozen=True)
class AlgorithmEntry:
    family: str
    runner: Callable
    l_rule: Callable[[int, int], int]  # (k, configured l) -> l
    eta: float | None = None           # fixed step size, if the variant pins one
    needs_index: bool = False


REGISTRY: dict[str, AlgorithmEntry] = {
    "ompr": AlgorithmEntry("ompr_l", alg.run_omprl, lambda k, l: 1),
    "omprl": AlgorithmEntry("ompr_l", alg.run_omprl, lambda k, l: min(l, k)),
    "iht_newton": AlgorithmEntry("ompr_l", alg.run_omprl, lambda k, l: k),
    "iht_newton_half": AlgorithmEntry("ompr_l", alg.run_omprl, lambda k, l: k, eta=0.5),
    "omp": AlgorithmEntry("omp", None, lambda k, l: 1),
    "cosamp": AlgorithmEntry("two_stage", alg.run_two_stage, lambda k, l: 2 * k),
    "sp": AlgorithmEntry("two_stage", alg.run_two_stage, lambda k, l: k),
    "two_stage": AlgorithmEntry("two_stage", alg.run_two_stage, lambda k, l: l),
    "ompr_hash": AlgorithmEntry("ompr_l", None, lambda k, l: 1, needs_index=True),
}


@dataclass
class AlgorithmChoice:
    """One configured method; ``k`` is filled in per cell."""
    name: str
    l: int = 1
    eta: float = 1.0
    max_iters: int = 1000
    tol: float = 1e-10
    init: str = "topk_correlation"
    label: str | None = None

    def __post_init__(self):
        if self.name not in REGISTRY:
            raise ConfigError(f"unknown algorithm {self.name!r}; choose from {sorted(REGISTRY)}")
        if self.label is None:
            self.label = self.name

    def config(self, k: int, seed: int = 0) -> AlgorithmConfig:
        entry = REGISTRY[self.name]
        eta = entry.eta if entry.eta is not None else self.eta
        return AlgorithmConfig(family=entry.family, k=k, l=entry.l_rule(k, self.l), eta=eta,
                               max_iters=self.max_iters, tol=self.tol, seed=seed, init=self.init)


def run_algorithm(choice: AlgorithmChoice, A, b, k: int, seed: int = 0, index=None,
                  fallback: str = "exact"):
    entry = REGISTRY[choice.name]
    cfg = choice.config(k, seed)
    if entry.family == "omp":
        return alg.run_omp(A, b, cfg)
    if entry.needs_index:
        if index is None:
            raise BadArguments(f"{choice.name} needs an LSH index")
        return run_ompr_hash(A, b, cfg, index, fallback=fallback)
    return entry.runner(A, b, cfg)


# -- experiment spec ---------------------------------------------------------------

@dataclass
class ExperimentSpec:
    kind: str = "phase_transition"
    m: int | None = None
    n: int | None = None
    k: int | None = None
    l: int = 1
    eta: float = 1.0
    rho: list[float] = field(default_factory=list)
    delta: list[float] = field(default_factory=list)
    ks: list[int] = field(default_factory=lambda: list(DEFAULT_NOISE_KS))
    noise_levels: list[float] = field(default_factory=lambda: list(DEFAULT_NOISE_LEVELS))
    noise_level: float = 0.0
    ns: list[int] = field(default_factory=list)
    algorithms: list[AlgorithmChoice] = field(default_factory=list)
    trials_per_cell: int = 50
    success_threshold: float = 0.01
    base_seed: int = 0
    output_dir: str = "results"
    threads: int = 1
    record_timing: bool = False
    matrix: str = "gaussian"
    eps: float = 0.1
    lsh_s: int | None = None
    lsh_q: int | None = None
    lsh_fallback: str = "exact"

    def __post_init__(self):
        self.algorithms = [_choice(a) for a in self.algorithms]

    def validate(self) -> "ExperimentSpec":
        if self.kind not in KINDS:
            raise ConfigError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.matrix not in MATRICES:
            raise ConfigError(f"matrix must be one of {MATRICES}, got {self.matrix!r}")
        if self.trials_per_cell < 1:
            raise ConfigError("trials_per_cell must be positive")
        if self.threads < 1:
            raise ConfigError("threads must be positive")
        if not 0 <= self.base_seed < 2**64:
            raise ConfigError("base_seed must be a u64")
        if not self.success_threshold > 0:
            raise ConfigError("success_threshold must be positive")
        if not self.algorithms:
            raise ConfigError("no algorithms configured")
        for v in list(self.rho) + list(self.delta):
            if not 0 < v <= 1:
                raise ConfigError(f"grid values must lie in (0, 1], got {v}")
        if any(level < 0 for level in list(self.noise_levels) + [self.noise_level]):
            raise ConfigError("noise levels must be non-negative")
        if self.kind == "phase_transition":
            if self.n is None or not self.rho or not (self.delta or self.m):
                raise ConfigError("phase_transition needs n, rho and delta (or m)")
            for d in self.grid_deltas():
                for r in self.rho:
                    if grid_mk(self.n, d, r)[1] < 1:
                        raise ConfigError(f"cell rho={r}, delta={d} gives k < 1")
        elif self.kind == "noise_sweep":
            if self.m is None or self.n is None or not self.ks or not self.noise_levels:
                raise ConfigError("noise_sweep needs m, n, ks and noise_levels")
        elif self.kind == "lsh_benchmark":
            if self.m is None or self.k is None or not self.ns:
                raise ConfigError("lsh_benchmark needs m, k and ns")
        elif self.n is None or self.k is None or (self.m is None and self.matrix == "gaussian"):
            raise ConfigError("single_run needs m, n and k")
        return self

    def grid_deltas(self) -> list[float]:
        return list(self.delta) if self.delta else [self.m / self.n]


def _choice(entry) -> AlgorithmChoice:
    if isinstance(entry, AlgorithmChoice):
        return entry
    if isinstance(entry, str):
        return AlgorithmChoice(name=entry)
    if isinstance(entry, dict):
        names = {f.name for f in dataclasses.fields(AlgorithmChoice)}
        unknown = set(entry) - names
        if unknown:
            raise ConfigError(f"unknown algorithm keys: {sorted(unknown)}")
        return AlgorithmChoice(**entry)
    raise ConfigError(f"cannot read algorithm entry {entry!r}")


def spec_from_dict(data: dict) -> ExperimentSpec:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    names = {f.name for f in dataclasses.fields(ExperimentSpec)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        return ExperimentSpec(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_spec(path) -> ExperimentSpec:
    """Read a JSON config. Missing files raise OSError, bad content ConfigError."""
    with open(path) as fh:
        text = fh.read()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return spec_from_dict(data)


def grid_mk(n: int, delta: float, rho: float) -> tuple[int, int]:
    m = max(1, int(round(delta * n)))
    return m, int(round(rho * m))


def build_problem(spec: ExperimentSpec, m: int, n: int, k: int, seed: int,
                  noise_level: float = 0.0) -> MeasurementProblem:
    """The problem a trial with this seed sees; ``run`` uses the same path to replay."""
    if spec.matrix == "gaussian":
        return make_problem(m, n, k, seed, noise_level)
    A = perturbed_identity(n, spec.eps, seed)
    x, support = sparse_signal(n, k, seed)
    problem = MeasurementProblem(A=A, b=A @ x, x_true=x, support=support, seed=int(seed))
    return add_noise(problem, noise_level, seed) if noise_level > 0 else problem


# -- trials -----------------------------------------------------------------------

@dataclass
class TrialRecord:
    algo: str
    trial: int
    trial_seed: int
    success: bool
    rel_err: float
    resid: float
    iterations: int
    status: str
    time_s: float = math.nan
    error: str = ""
    fallbacks: int = 0
    candidates: float = math.nan


def _evaluate(choice: AlgorithmChoice, problem: MeasurementProblem, k: int, trial: int,
              seed: int, threshold: float, timing: bool, index=None,
              fallback: str = "exact") -> TrialRecord:
    start = time.perf_counter()
    try:
        state, trace = run_algorithm(choice, problem.A, problem.b, k, seed, index, fallback)
    except (RecoveryError, np.linalg.LinAlgError, ArithmeticError, ValueError) as exc:
        return TrialRecord(choice.label, trial, seed, False, math.nan, math.nan, 0, "Error",
                           error=type(exc).__name__)
    elapsed = time.perf_counter() - start if timing else math.nan
    x_true = problem.x_true
    norm = float(np.linalg.norm(x_true))
    rel = float(np.linalg.norm(state.x - x_true)) / norm if norm > 0 else float(np.linalg.norm(state.x))
    queries = [s.query for s in trace.snapshots if s.query is not None]
    return TrialRecord(
        algo=choice.label, trial=trial, trial_seed=seed, success=rel <= threshold, rel_err=rel,
        resid=float(np.linalg.norm(state.residual)), iterations=state.iteration,
        status=trace.status.value if trace.status is not None else "",
        time_s=elapsed,
        fallbacks=sum(q.exact_fallback_used for q in queries),
        candidates=float(np.mean([q.candidates_examined for q in queries])) if queries else math.nan)


def _pool_map(fn, items, threads: int) -> list:
    if threads <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))  # map keeps input order


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return "nan" if math.isnan(v) else repr(float(v))
    return str(v)


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _mean(values) -> float:
    values = [v for v in values if not math.isnan(v)]
    return float(np.mean(values)) if values else math.nan


def _stderr(values) -> float:
    values = np.asarray([v for v in values if not math.isnan(v)])
    if values.size < 2:
        return math.nan
    return float(np.std(values, ddof=1) / np.sqrt(values.size))


def _output_dir(spec: ExperimentSpec) -> Path:
    out = Path(spec.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- phase transition ---------------------------------------------------------------

@dataclass
class GridCell:
    rho: float
    delta: float
    m: int
    k: int
    trials: dict[str, list[TrialRecord]]

    def success_prob(self, algo: str) -> float:
        recs = self.trials[algo]
        return sum(r.success for r in recs) / len(recs)


@dataclass
class GridResult:
    n: int
    cells: list[GridCell]
    algorithms: list[str]

    def table(self, algo: str) -> list[tuple]:
        return [(c.rho, c.delta, c.success_prob(algo), _mean(r.rel_err for r in c.trials[algo]),
                 _mean(r.time_s for r in c.trials[algo]), len(c.trials[algo]))
                for c in self.cells]


GRID_HEADER = ("rho", "delta", "success_prob", "mean_rel_err", "mean_time_s", "trials")
GRID_TRIAL_HEADER = ("rho", "delta", "m", "k", "trial", "trial_seed", "success", "rel_err",
                     "resid", "iterations", "status", "error")


def run_phase_transition(spec: ExperimentSpec, write: bool = True) -> GridResult:
    spec.validate()
    if spec.kind != "phase_transition":
        raise ConfigError("run_phase_transition needs kind = phase_transition")
    n = spec.n
    layout = [(d, r) for d in spec.grid_deltas() for r in spec.rho]
    jobs = [(ci, t) for ci in range(len(layout)) for t in range(spec.trials_per_cell)]

    def trial(job):
        ci, t = job
        d, r = layout[ci]
        m, k = grid_mk(n, d, r)
        seed = derive_seed(spec.base_seed, ci, t)
        try:
            problem = build_problem(spec, m, n, k, seed)
        except RecoveryError as exc:
            return [TrialRecord(a.label, t, seed, False, math.nan, math.nan, 0, "Error",
                                error=type(exc).__name__) for a in spec.algorithms]
        return [_evaluate(a, problem, k, t, seed, spec.success_threshold, spec.record_timing)
                for a in spec.algorithms]

    outcomes = _pool_map(trial, jobs, spec.threads)
    labels = [a.label for a in spec.algorithms]
    cells = []
    for ci, (d, r) in enumerate(layout):
        m, k = grid_mk(n, d, r)
        per = outcomes[ci * spec.trials_per_cell:(ci + 1) * spec.trials_per_cell]
        cells.append(GridCell(r, d, m, k, {lab: [recs[i] for recs in per]
                                             for i, lab in enumerate(labels)}))
    result = GridResult(n, cells, labels)
    if write:
        out = _output_dir(spec)
        for lab in labels:
            _write_csv(out / f"grid_{lab}.csv", GRID_HEADER, result.table(lab))
            _write_csv(out / f"grid_trials_{lab}.csv", GRID_TRIAL_HEADER,
                       [(c.rho, c.delta, c.m, c.k, rec.trial, rec.trial_seed, rec.success,
                         rec.rel_err, rec.resid, rec.iterations, rec.status, rec.error)
                        for c in cells for rec in c.trials[lab]])
            (out / f"heatmap_{lab}.svg").write_text(heatmap_svg(result, lab))
    return result


# -- noise sweep ----------------------------------------------------------------------

NOISE_HEADER = ("k", "noise_level", "mean_resid", "stderr", "trials")
NOISE_TRIAL_HEADER = ("k", "noise_level", "trial", "trial_seed", "resid", "rel_err",
                      "iterations", "status", "error")
PAIR_HEADER = ("k", "noise_level", "algo_a", "algo_b", "mean_diff", "stderr",
               "ci_low", "ci_high", "trials")


@dataclass
class NoiseResult:
    cells: list[tuple[int, float]]
    trials: dict[tuple[int, float], dict[str, list[TrialRecord]]]
    algorithms: list[str]

    def table(self, algo: str) -> list[tuple]:
        rows = []
        for cell in self.cells:
            resids = [r.resid for r in self.trials[cell][algo]]
            rows.append((cell[0], cell[1], _mean(resids), _stderr(resids), len(resids)))
        return rows

    def paired(self, a: str, b: str) -> list[tuple]:
        """Per-cell ``resid(a) - resid(b)`` with a 95% interval of mean +- 1.96 SE."""
        rows = []
        for cell in self.cells:
            diffs = [ra.resid - rb.resid
                     for ra, rb in zip(self.trials[cell][a], self.trials[cell][b])]
            mean, se = _mean(diffs), _stderr(diffs)
            rows.append((cell[0], cell[1], a, b, mean, se, mean - 1.96 * se, mean + 1.96 * se,
                         len(diffs)))
        return rows


def run_noise_sweep(spec: ExperimentSpec, write: bool = True) -> NoiseResult:
    spec.validate()
    if spec.kind != "noise_sweep":
        raise ConfigError("run_noise_sweep needs kind = noise_sweep")
    cells = [(k, level) for k in spec.ks for level in spec.noise_levels]
    jobs = [(ci, t) for ci in range(len(cells)) for t in range(spec.trials_per_cell)]

    def trial(job):
        ci, t = job
        k, level = cells[ci]
        seed = derive_seed(spec.base_seed, ci, t)
        problem = build_problem(spec, spec.m, spec.n, k, seed, level)
        return [_evaluate(a, problem, k, t, seed, spec.success_threshold, spec.record_timing)
                for a in spec.algorithms]

    outcomes = _pool_map(trial, jobs, spec.threads)
    labels = [a.label for a in spec.algorithms]
    trials = {}
    for ci, cell in enumerate(cells):
        per = outcomes[ci * spec.trials_per_cell:(ci + 1) * spec.trials_per_cell]
        trials[cell] = {lab: [recs[i] for recs in per] for i, lab in enumerate(labels)}
    result = NoiseResult(cells, trials, labels)
    if write:
        out = _output_dir(spec)
        for lab in labels:
            _write_csv(out / f"noise_{lab}.csv", NOISE_HEADER, result.table(lab))
            _write_csv(out / f"noise_trials_{lab}.csv", NOISE_TRIAL_HEADER,
                       [(cell[0], cell[1], r.trial, r.trial_seed, r.resid, r.rel_err,
                         r.iterations, r.status, r.error)
                        for cell in cells for r in trials[cell][lab]])
        pairs = [row for i, a in enumerate(labels) for b in labels[i + 1:]
                 for row in result.paired(a, b)]
        _write_csv(out / "noise_pairs.csv", PAIR_HEADER, pairs)
    return result


# -- LSH benchmark ----------------------------------------------------------------------

LSH_HEADER = ("n", "algo", "trial", "trial_seed", "resid", "rel_err", "iterations", "status",
              "fallbacks", "mean_candidates", "error")
LSH_TIMING_HEADER = ("n", "algo", "trial", "time_s", "index_build_s")


@dataclass
class LshResult:
    records: list[tuple[int, TrialRecord]]
    build_times: dict[tuple[int, int], float]
    algorithms: list[str]

    def mean(self, n: int, algo: str, attr: str) -> float:
        return _mean(getattr(r, attr) for nn, r in self.records if nn == n and r.algo == algo)


def run_lsh_benchmark(spec: ExperimentSpec, write: bool = True) -> LshResult:
    """Index construction is offline and never counted in reconstruction time."""
    spec.validate()
    if spec.kind != "lsh_benchmark":
        raise ConfigError("run_lsh_benchmark needs kind = lsh_benchmark")
    jobs = [(ni, t) for ni in range(len(spec.ns)) for t in range(spec.trials_per_cell)]

    def trial(job):
        ni, t = job
        n = spec.ns[ni]
        seed = derive_seed(spec.base_seed, ni, t)
        problem = build_problem(spec, spec.m, n, spec.k, seed, spec.noise_level)
        index, build_s = None, math.nan
        if any(REGISTRY[a.name].needs_index for a in spec.algorithms):
            s_default, q_default = default_params(n)
            start = time.perf_counter()
            index = build_index(problem.A, spec.lsh_s or s_default, spec.lsh_q or q_default,
                                seed=seed)
            build_s = time.perf_counter() - start
        recs = [_evaluate(a, problem, spec.k, t, seed, spec.success_threshold,
                          spec.record_timing, index, spec.lsh_fallback)
                for a in spec.algorithms]
        return recs, build_s

    outcomes = _pool_map(trial, jobs, spec.threads)
    records = [(spec.ns[ni], r) for (ni, _), (recs, _) in zip(jobs, outcomes) for r in recs]
    builds = {job: b for job, (_, b) in zip(jobs, outcomes)}
    labels = [a.label for a in spec.algorithms]
    result = LshResult(records, builds, labels)
    if write:
        out = _output_dir(spec)
        _write_csv(out / "lsh_results.csv", LSH_HEADER,
                   [(n, r.algo, r.trial, r.trial_seed, r.resid, r.rel_err, r.iterations,
                     r.status, r.fallbacks, r.candidates, r.error) for n, r in records])
        (out / "lsh_resid.svg").write_text(
            line_plot_svg(spec.ns, {a: [result.mean(n, a, "resid") for n in spec.ns]
                                    for a in labels}, "residual norm"))
        if spec.record_timing:
            _write_csv(out / "lsh_timing.csv", LSH_TIMING_HEADER,
                       [(spec.ns[ni], r.algo, r.trial, r.time_s, builds[(ni, r.trial)])
                        for (ni, _), (recs, _) in zip(jobs, outcomes) for r in recs])
            (out / "lsh_time.svg").write_text(
                line_plot_svg(spec.ns, {a: [result.mean(n, a, "time_s") for n in spec.ns]
                                        for a in labels}, "reconstruction time (s)"))
    return result


# -- SVG output ------------------------------------------------------------------------

def probability_color(p: float) -> str:
    """Fixed blue (p = 0) to red (p = 1) ramp."""
    if math.isnan(p):
        return "#cccccc"
    p = min(max(p, 0.0), 1.0)
    return f"#{int(round(255 * p)):02x}00{int(round(255 * (1 - p))):02x}"


def heatmap_svg(result: GridResult, algo: str, cell: int = 36) -> str:
    deltas = sorted({c.delta for c in result.cells})
    rhos = sorted({c.rho for c in result.cells})
    left, top = 60, 30
    width = left + cell * len(deltas) + 90
    height = top + cell * len(rhos) + 50
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
             f'font-family="sans-serif" font-size="10">',
             f'<text x="{left}" y="18" font-size="12">{algo}: success probability</text>']
    for c in result.cells:
        x = left + cell * deltas.index(c.delta)
        y = top + cell * (len(rhos) - 1 - rhos.index(c.rho))
        p = c.success_prob(algo)
        parts.append(f'<rect x="{x}" y="{y}" width="{cell}" height="{cell}" '
                     f'fill="{probability_color(p)}"><title>rho={c.rho:g} delta={c.delta:g} '
                     f'p={p:.2f}</title></rect>')
    base = top + cell * len(rhos)
    for i, d in enumerate(deltas):
        parts.append(f'<text x="{left + cell * i + cell / 2}" y="{base + 14}" '
                     f'text-anchor="middle">{d:g}</text>')
    for i, r in enumerate(rhos):
        parts.append(f'<text x="{left - 6}" y="{top + cell * (len(rhos) - 1 - i) + cell / 2 + 3}" '
                     f'text-anchor="end">{r:g}</text>')
    parts.append(f'<text x="{left + cell * len(deltas) / 2}" y="{base + 34}" '
                 f'text-anchor="middle">delta = m/n</text>')
    parts.append(f'<text x="14" y="{top + cell * len(rhos) / 2}" '
                 f'transform="rotate(-90 14 {top + cell * len(rhos) / 2})" '
                 f'text-anchor="middle">rho = k/m</text>')
    lx = left + cell * len(deltas) + 20
    for i in range(11):
        p = 1 - i / 10
        parts.append(f'<rect x="{lx}" y="{top + 10 * i}" width="14" height="10" '
                     f'fill="{probability_color(p)}"/>')
    parts.append(f'<text x="{lx + 18}" y="{top + 8}">1</text>')
    parts.append(f'<text x="{lx + 18}" y="{top + 108}">0</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def line_plot_svg(xs, series: dict[str, list[float]], ylabel: str) -> str:
    """Log-x line plot of one or more series."""
    w, h, left, top, right, bottom = 480, 300, 70, 20, 130, 40
    lx = [math.log10(x) for x in xs]
    ys = [v for vals in series.values() for v in vals if not math.isnan(v)]
    ymax = max(ys) if ys else 1.0
    ymax = ymax if ymax > 0 else 1.0
    x0, x1 = min(lx), max(lx)
    span = x1 - x0 or 1.0

    def px(v):
        return left + (v - x0) / span * (w - left - right)

    def py(v):
        return h - bottom - v / ymax * (h - top - bottom)

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" '
             f'font-family="sans-serif" font-size="10">',
             f'<line x1="{left}" y1="{h - bottom}" x2="{w - right}" y2="{h - bottom}" stroke="black"/>',
             f'<line x1="{left}" y1="{top}" x2="{left}" y2="{h - bottom}" stroke="black"/>',
             f'<text x="{left - 4}" y="{top + 4}" text-anchor="end">{ymax:.3g}</text>',
             f'<text x="{left - 4}" y="{h - bottom}" text-anchor="end">0</text>',
             f'<text x="{(left + w - right) / 2}" y="{h - 8}" text-anchor="middle">n (log scale)</text>',
             f'<text x="12" y="{h / 2}" transform="rotate(-90 12 {h / 2})" '
             f'text-anchor="middle">{ylabel}</text>']
    for x, v in zip(xs, lx):
        parts.append(f'<text x="{px(v)}" y="{h - bottom + 14}" text-anchor="middle">{x:g}</text>')
    for i, (name, vals) in enumerate(series.items()):
        color = PALETTE[i % len(PALETTE)]
        pts = " ".join(f"{px(a):.1f},{py(b):.1f}" for a, b in zip(lx, vals) if not math.isnan(b))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{w - right + 10}" y="{top + 14 * i + 10}" fill="{color}">{name}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def ensure_writable(path) -> None:
    """Raise OSError early when the output directory cannot be created or written."""
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise PermissionError(f"output directory {out} is not writable")
