"""Per-iteration verification of the convergence inequalities.

Given a problem with known x*, consecutive states of a run, and exhaustively
computed RIP constants, each check evaluates one inequality from the
convergence analysis and reports ``hold``, ``fail`` or ``skip``. A check is
skipped, never failed, when its hypotheses (RIP bounds, step-size range,
noiseless data, f > 0) are not met. Sampled RIP estimates are lower bounds
and never gate anything: only exhaustive values are accepted.

Slack is ``rhs - lhs`` for an inequality ``lhs <= rhs``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, TextIO

import numpy as np

from .algorithms import AlgorithmConfig, RecoveryState, RecoveryTrace
from .ensemble import MeasurementProblem
from .errors import BadArguments, TooLarge
from .linalg import MAX_SUBSETS, rip_constant_exhaustive
from .thresholding import partial_hard_threshold

__all__ = [
    "Check",
    "RipContext",
    "IterationDiagnostics",
    "check_ompr_iteration",
    "check_two_stage_iteration",
    "admissible_step_sizes",
    "diagnose_trace",
    "diagnostics_rows",
    "write_diagnostics_csv",
]

CHECK_RTOL = 1e-9
DATA_RTOL = 1e-13       # absolute slack allowance, relative to ||b||^2
CONVERGED_RTOL = 1e-20  # f below this fraction of ||b||^2 counts as zero
TWO_STAGE_DELTA_MAX = 0.35
TWO_STAGE_DECREASE = 1e-4
CSV_HEADER = ("trial_seed", "iter", "check_name", "status", "slack")


@dataclass
class Check:
    name: str
    status: str  # "hold", "fail" or "skip"
    slack: float = math.nan
    note: str = ""

    @property
    def holds(self) -> bool:
        return self.status == "hold"


@dataclass
class RipContext:
    delta_2k: float | None = None
    delta_2l: float | None = None
    delta_2kl: float | None = None  # order 2k + l
    delta_2: float | None = None

    def __post_init__(self):
        for name in ("delta_2k", "delta_2l", "delta_2kl", "delta_2"):
            value = getattr(self, name)
            if value is not None and not 0.0 <= value <= 1.0:
                raise BadArguments(f"{name} = {value} outside [0, 1]")

    @classmethod
    def exhaustive(cls, A, k: int, l: int, max_subsets: int = MAX_SUBSETS) -> "RipContext":
        """Compute every constant whose enumeration fits under the guard."""
        n = np.shape(A)[1]

        def delta(order: int) -> float | None:
            if order > n:
                return None
            try:
                return rip_constant_exhaustive(A, order, max_subsets=max_subsets).delta
            except TooLarge:
                return None

        return cls(delta_2k=delta(2 * k), delta_2l=delta(2 * l),
                   delta_2kl=delta(2 * k + l), delta_2=delta(2))


@dataclass
class IterationDiagnostics:
    iteration: int
    md: np.ndarray
    fa: np.ndarray
    co: np.ndarray
    found: np.ndarray
    lost: np.ndarray
    f_before: float
    f_after: float
    f_y: float = math.nan
    z_md_sq: float = math.nan
    x_fa_sq: float = math.nan
    y_found_sq: float = math.nan
    c_const: float = math.nan
    checks: list[Check] = field(default_factory=list)
    note: str = ""

    def failed(self) -> list[Check]:
        return [c for c in self.checks if c.status == "fail"]


def _inequality(name: str, lhs: float, rhs: float, data_scale: float) -> Check:
    slack = rhs - lhs
    allowance = CHECK_RTOL * max(abs(lhs), abs(rhs)) + DATA_RTOL * data_scale
    return Check(name, "hold" if slack >= -allowance else "fail", slack)


def _skip(name: str, note: str) -> Check:
    return Check(name, "skip", math.nan, note)


def _truth(problem: MeasurementProblem) -> tuple[np.ndarray, np.ndarray]:
    if problem.x_true is None:
        raise BadArguments("diagnostics need a problem with ground truth")
    support = (problem.support if problem.support is not None
               else np.flatnonzero(problem.x_true))
    return problem.x_true, np.asarray(support, dtype=np.int64)


def _sets(I: np.ndarray, I_star: np.ndarray):
    return (np.setdiff1d(I_star, I), np.setdiff1d(I, I_star), np.intersect1d(I, I_star))


def _f(A: np.ndarray, x: np.ndarray, b: np.ndarray) -> float:
    nz = np.flatnonzero(x)
    r = b - A[:, nz] @ x[nz]
    return 0.5 * float(r @ r)


def _balance(md, fa, support, I_star, k) -> Check:
    if support.size == k and I_star.size == k:
        gap = abs(md.size - fa.size)
        return Check("set_balance", "hold" if gap == 0 else "fail", -float(gap))
    return _skip("set_balance", "support sizes differ from k")


def check_ompr_iteration(problem: MeasurementProblem, before: RecoveryState, after: RecoveryState,
                         cfg: AlgorithmConfig, rip: RipContext) -> IterationDiagnostics:
    """Evaluate the OMPR(l) per-iteration inequalities between two states.

    Checks, for z = x + eta * A^T (b - A x) and y its partial hard threshold:

    * ``decrease_bound``: f(y) - f(x) <= (1 + d_2l - 1/eta) ||y_F||^2
    * ``claim1_gap``: 2 (2 eta - 1/(1 - d_2k)) f(x) <= ||z_MD||^2 - ||x_FA||^2
    * ``flb_lower`` / ``flb_upper``:
      (1 - eta)^2 / eta ||x*_MD||^2 <= f(x) <= ||z_MD||^2 / (4 eta (1 - eta)^2)
    * ``claim2_found_nonempty`` and ``claim2_decrease``: F != {} and
      ||y_F||^2 >= (l/k) c f(x), c = min(4 eta (1-eta)^2, 2 (2 eta - 1/(1 - d_2k)))
    * ``set_balance``: |MD| = |FA| when both supports have size k

    The first holds for any data; the middle group needs b = A x*,
    d_2k < 1 - 1/(2 eta) and (for flb and claim2) eta < 1, and claim2 also
    eta > 1/2.
    """
    A, b = problem.A, problem.b
    x_star, I_star = _truth(problem)
    k, l, eta = cfg.k, cfg.l, cfg.eta
    I = before.support
    md, fa, co = _sets(I, I_star)

    f = _f(A, before.x, b)
    residual = b - A[:, I] @ before.x[I]
    z = before.x + eta * (A.T @ residual)
    th = partial_hard_threshold(z, I, l, k)
    if not np.array_equal(th.support, after.support):
        raise BadArguments("`after` is not the OMPR(l) successor of `before`")
    y = th.y
    f_y = _f(A, y, b)
    f_after = _f(A, after.x, b)
    bb = float(b @ b)

    d = IterationDiagnostics(
        iteration=before.iteration, md=md, fa=fa, co=co, found=th.found, lost=th.lost,
        f_before=f, f_after=f_after, f_y=f_y,
        z_md_sq=float(z[md] @ z[md]), x_fa_sq=float(before.x[fa] @ before.x[fa]),
        y_found_sq=float(y[th.found] @ y[th.found]))
    names = ("decrease_bound", "claim1_gap", "flb_lower", "flb_upper",
             "claim2_found_nonempty", "claim2_decrease")

    if f <= CONVERGED_RTOL * 0.5 * bb:
        d.note = "converged: f(x) = 0, bounds assume f > 0"
        d.checks = [_skip(name, "converged") for name in names]
        d.checks.append(_balance(md, fa, I, I_star, k))
        return d

    checks = d.checks
    if rip.delta_2l is None:
        checks.append(_skip("decrease_bound", "delta_2l unavailable"))
    else:
        checks.append(_inequality("decrease_bound", f_y - f,
                                  (1.0 + rip.delta_2l - 1.0 / eta) * d.y_found_sq, bb))

    d2k = rip.delta_2k
    why = None
    if not problem.noiseless:
        why = "noisy measurements"
    elif d2k is None:
        why = "delta_2k unavailable"
    elif not d2k < 1.0 - 1.0 / (2.0 * eta):
        why = "delta_2k >= 1 - 1/(2 eta)"

    if why is None:
        gap = 2.0 * (2.0 * eta - 1.0 / (1.0 - d2k))
        d.c_const = min(4.0 * eta * (1.0 - eta) ** 2, gap)
        checks.append(_inequality("claim1_gap", gap * f, d.z_md_sq - d.x_fa_sq, bb))
    else:
        checks.append(_skip("claim1_gap", why))

    flb_why = why or (None if eta < 1.0 else "eta >= 1")
    if flb_why is None:
        xs_md_sq = float(x_star[md] @ x_star[md])
        checks.append(_inequality("flb_lower", (1.0 - eta) ** 2 / eta * xs_md_sq, f, bb))
        checks.append(_inequality("flb_upper", f, d.z_md_sq / (4.0 * eta * (1.0 - eta) ** 2), bb))
    else:
        checks.append(_skip("flb_lower", flb_why))
        checks.append(_skip("flb_upper", flb_why))

    c2_why = flb_why or (None if eta > 0.5 else "eta <= 1/2")
    if c2_why is None:
        nf = th.found.size
        checks.append(Check("claim2_found_nonempty", "hold" if nf >= 1 else "fail", float(nf - 1)))
        checks.append(_inequality("claim2_decrease", (l / k) * d.c_const * f, d.y_found_sq, bb))
    else:
        checks.append(_skip("claim2_found_nonempty", c2_why))
        checks.append(_skip("claim2_decrease", c2_why))

    checks.append(_balance(md, fa, I, I_star, k))
    return d


def check_two_stage_iteration(problem: MeasurementProblem, before: RecoveryState,
                              after: RecoveryState, cfg: AlgorithmConfig,
                              rip: RipContext) -> IterationDiagnostics:
    """Check ``f(x_next) <= f(x) - 1e-4 * min(l, |MD|)`` for two-stage runs.

    Gated on an exhaustive ``delta_{2k+l} <= 0.35`` and noiseless data; x*
    must have entries in {-1, 0, +1}.
    """
    A, b = problem.A, problem.b
    x_star, I_star = _truth(problem)
    if not np.all(np.isin(x_star, (-1.0, 0.0, 1.0))):
        raise BadArguments("two-stage check assumes x* with entries in {-1, 0, +1}")
    I = before.support
    md, fa, co = _sets(I, I_star)
    f = _f(A, before.x, b)
    f_after = _f(A, after.x, b)
    bb = float(b @ b)
    d = IterationDiagnostics(
        iteration=before.iteration, md=md, fa=fa, co=co,
        found=np.setdiff1d(after.support, I), lost=np.setdiff1d(I, after.support),
        f_before=f, f_after=f_after)

    if f <= CONVERGED_RTOL * 0.5 * bb:
        d.note = "converged"
        d.checks.append(_skip("two_stage_decrease", "converged"))
    elif not problem.noiseless:
        d.checks.append(_skip("two_stage_decrease", "noisy measurements"))
    elif rip.delta_2kl is None:
        d.checks.append(_skip("two_stage_decrease", "delta_2k+l unavailable"))
    elif rip.delta_2kl > TWO_STAGE_DELTA_MAX:
        d.checks.append(_skip("two_stage_decrease", "delta_2k+l > 0.35"))
    else:
        d.checks.append(_inequality("two_stage_decrease", f_after - f,
                                    -TWO_STAGE_DECREASE * min(cfg.l, md.size), bb))
    d.checks.append(_balance(md, fa, I, I_star, cfg.k))
    return d


def admissible_step_sizes(rip: RipContext) -> tuple[float, float] | None:
    """Open interval of eta with eta (1 + d_2l) < 1 and eta (1 - d_2k) > 1/2."""
    if rip.delta_2k is None or rip.delta_2l is None:
        raise BadArguments("admissible_step_sizes needs delta_2k and delta_2l")
    if rip.delta_2k >= 1.0:
        return None
    lo = 1.0 / (2.0 * (1.0 - rip.delta_2k))
    hi = 1.0 / (1.0 + rip.delta_2l)
    return (lo, hi) if lo < hi else None


def diagnose_trace(problem: MeasurementProblem, cfg: AlgorithmConfig, trace: RecoveryTrace,
                   rip: RipContext) -> list[IterationDiagnostics]:
    """Run the family-appropriate check on every consecutive pair of states."""
    if cfg.family == "ompr_l":
        check = check_ompr_iteration
    elif cfg.family == "two_stage":
        check = check_two_stage_iteration
    else:
        raise BadArguments(f"no per-iteration checks for family {cfg.family!r}")
    A, b = problem.A, problem.b
    states = [trace.state(i, A, b) for i in range(len(trace.snapshots))]
    return [check(problem, s0, s1, cfg, rip) for s0, s1 in zip(states, states[1:])]


def diagnostics_rows(trial_seed: int, diags: Iterable[IterationDiagnostics]):
    for d in diags:
        for c in d.checks:
            yield (trial_seed, d.iteration, c.name, c.status, c.slack)


def write_diagnostics_csv(fh: TextIO, rows, header: bool = True) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    if header:
        writer.writerow(CSV_HEADER)
    for seed, it, name, status, slack in rows:
        writer.writerow((seed, it, name, status, "" if math.isnan(slack) else repr(float(slack))))
