"""Greedy and hard-thresholding recovery algorithms.

Every routine minimises f(x) = 0.5 * ||Ax - b||^2 over k-sparse x and returns
the final `RecoveryState` plus a `RecoveryTrace` holding one snapshot per
iteration. The OMPR(l) family covers OMPR (l = 1) and IHT-Newton / HTP
(l = k) through the same code path; the two-stage family covers Subspace
Pursuit (l = k) and CoSaMP (l = 2k).
"""
from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .ensemble import rng_stream
from .errors import BadArguments
from .linalg import _solve_columns, _vector, as_matrix, as_support
from .thresholding import partial_hard_threshold, top_indices

__all__ = [
    "AlgorithmConfig",
    "RecoveryState",
    "RecoveryTrace",
    "Snapshot",
    "Status",
    "initialize_support",
    "state_on_support",
    "run_omprl",
    "run_ompr",
    "run_iht_newton",
    "run_omp",
    "run_two_stage",
    "run_cosamp",
    "run_subspace_pursuit",
]

FAMILIES = ("ompr_l", "omp", "two_stage")
INIT_MODES = ("topk_correlation", "random")
INIT_STREAM = 3
STALL_RTOL = 1e-14


class Status(str, enum.Enum):
    CONVERGED = "Converged"
    MAX_ITERS = "MaxIters"
    STALLED = "Stalled"


@dataclass
class AlgorithmConfig:
    family: str = "ompr_l"
    k: int = 1
    l: int = 1
    eta: float = 1.0
    max_iters: int = 1000
    tol: float = 1e-10
    seed: int = 0
    init: str = "topk_correlation"

    def validate(self, m: int, n: int) -> None:
        if self.family not in FAMILIES:
            raise BadArguments(f"unknown family {self.family!r}")
        if self.k < 1 or self.k > min(m, n):
            raise BadArguments(f"k = {self.k} must lie in [1, min(m, n) = {min(m, n)}]")
        if self.family == "ompr_l" and not 1 <= self.l <= self.k:
            raise BadArguments(f"ompr_l needs 1 <= l <= k, got l = {self.l}, k = {self.k}")
        if self.family == "two_stage":
            if not 1 <= self.l <= 2 * self.k:
                raise BadArguments(f"two_stage needs 1 <= l <= 2k, got l = {self.l}")
            if self.k + self.l > min(m, n):
                raise BadArguments(f"two_stage needs k + l <= m, got {self.k + self.l} > {m}")
        if not self.eta > 0:
            raise BadArguments(f"step size must be positive, got {self.eta}")
        if self.max_iters < 0 or self.tol < 0:
            raise BadArguments("max_iters and tol must be non-negative")
        if self.init not in INIT_MODES:
            raise BadArguments(f"unknown init mode {self.init!r}")


@dataclass
class RecoveryState:
    x: np.ndarray
    support: np.ndarray
    objective: float
    iteration: int
    residual: np.ndarray  # b - A x


@dataclass
class Snapshot:
    iteration: int
    support: np.ndarray
    values: np.ndarray  # x restricted to support
    objective: float
    found: np.ndarray
    lost: np.ndarray
    enlarged: np.ndarray | None = None  # two-stage J before reduction
    query: object | None = None         # lsh.QueryReport for hashed selection

    @classmethod
    def of(cls, state: RecoveryState, found=None, lost=None, **extra) -> "Snapshot":
        empty = np.empty(0, dtype=np.int64)
        return cls(
            iteration=state.iteration,
            support=state.support.copy(),
            values=state.x[state.support].copy(),
            objective=state.objective,
            found=empty if found is None else np.asarray(found, dtype=np.int64),
            lost=empty if lost is None else np.asarray(lost, dtype=np.int64),
            **extra,
        )


@dataclass
class RecoveryTrace:
    snapshots: list[Snapshot] = field(default_factory=list)
    status: Status | None = None

    @property
    def objectives(self) -> np.ndarray:
        return np.array([s.objective for s in self.snapshots])

    @property
    def supports(self) -> list[np.ndarray]:
        return [s.support for s in self.snapshots]

    def state(self, i: int, A: np.ndarray, b: np.ndarray) -> RecoveryState:
        """Rebuild the full state recorded in snapshot `i`."""
        snap = self.snapshots[i]
        x = np.zeros(A.shape[1])
        x[snap.support] = snap.values
        r = b - A[:, snap.support] @ snap.values
        return RecoveryState(x=x, support=snap.support.copy(), objective=snap.objective,
                             iteration=snap.iteration, residual=r)


@dataclass
class Step:
    """Support proposed by one iteration, before the least-squares solve."""
    support: np.ndarray
    found: np.ndarray
    lost: np.ndarray
    extra: dict = field(default_factory=dict)


def state_on_support(A: np.ndarray, b: np.ndarray, support: np.ndarray,
                     iteration: int) -> RecoveryState:
    x = np.zeros(A.shape[1])
    if support.size:
        cols = A[:, support]
        coef = _solve_columns(cols, b)
        x[support] = coef
        r = b - cols @ coef
    else:
        r = b.copy()
    return RecoveryState(x=x, support=support, objective=0.5 * float(r @ r),
                         iteration=iteration, residual=r)


def initialize_support(A, b, k: int, mode: str = "topk_correlation", seed: int = 0) -> RecoveryState:
    """Initial k-sparse iterate, least-squares fitted on its support.

    ``topk_correlation`` takes the k largest ``|A^T b|``; ``random`` draws a
    uniform k-subset from the seeded generator.
    """
    A = as_matrix(A)
    b = _vector(b, A.shape[0], "b")
    return _initialize(A, b, k, mode, seed)


def _initialize(A: np.ndarray, b: np.ndarray, k: int, mode: str, seed: int) -> RecoveryState:
    m, n = A.shape
    if k < 1 or k > min(m, n):
        raise BadArguments(f"k = {k} must lie in [1, min(m, n)]")
    if mode == "topk_correlation":
        support = top_indices(np.abs(A.T @ b), k)
    elif mode == "random":
        support = np.sort(rng_stream(seed, INIT_STREAM).choice(n, size=k, replace=False))
    else:
        raise BadArguments(f"unknown init mode {mode!r}")
    return state_on_support(A, b, support.astype(np.int64), iteration=1)


def _initial_state(A, b, cfg: AlgorithmConfig, init) -> RecoveryState:
    if init is None:
        return _initialize(A, b, cfg.k, cfg.init, cfg.seed)
    if isinstance(init, RecoveryState):
        return init
    support = as_support(init, A.shape[1])
    if support.size != cfg.k:
        raise BadArguments(f"initial support has {support.size} entries, expected k = {cfg.k}")
    return state_on_support(A, b, support, iteration=1)


def _drive(A, b, cfg: AlgorithmConfig, state: RecoveryState,
           step: Callable[[RecoveryState], Step | None],
           max_iters: int | None = None) -> tuple[RecoveryState, RecoveryTrace]:
    trace = RecoveryTrace([Snapshot.of(state)])
    budget = cfg.max_iters if max_iters is None else max_iters
    for _ in range(budget):
        if state.objective <= cfg.tol:
            trace.status = Status.CONVERGED
            return state, trace
        proposal = step(state)
        if proposal is None:
            trace.status = Status.STALLED
            return state, trace
        new = state_on_support(A, b, proposal.support, state.iteration + 1)
        trace.snapshots.append(Snapshot.of(new, proposal.found, proposal.lost, **proposal.extra))
        prev, state = state, new
        if state.objective <= cfg.tol:
            trace.status = Status.CONVERGED
            return state, trace
        if (np.array_equal(prev.support, state.support)
                and prev.objective - state.objective < STALL_RTOL * prev.objective):
            trace.status = Status.STALLED
            return state, trace
    trace.status = Status.CONVERGED if state.objective <= cfg.tol else Status.MAX_ITERS
    return state, trace


def _prepare(A, b, cfg: AlgorithmConfig, family: str):
    A = as_matrix(A)
    m, n = A.shape
    b = _vector(b, m, "b")
    if cfg.family != family:
        raise BadArguments(f"config family is {cfg.family!r}, expected {family!r}")
    cfg.validate(m, n)
    return A, b


def run_omprl(A, b, cfg: AlgorithmConfig, init=None) -> tuple[RecoveryState, RecoveryTrace]:
    """OMPR(l): gradient step, partial hard threshold, least squares.

    Per iteration ``z = x + eta * A^T (b - A x)``; the new support keeps the k
    largest entries of z over the current support joined with the l largest
    entries outside it; x is then refit by least squares on that support.
    """
    A, b = _prepare(A, b, cfg, "ompr_l")
    state = _initial_state(A, b, cfg, init)

    def step(s: RecoveryState) -> Step:
        z = s.x + cfg.eta * (A.T @ s.residual)
        th = partial_hard_threshold(z, s.support, cfg.l, cfg.k)
        return Step(th.support, th.found, th.lost)

    return _drive(A, b, cfg, state, step)


def run_ompr(A, b, cfg: AlgorithmConfig, init=None):
    """OMPR is OMPR(1)."""
    return run_omprl(A, b, dataclasses.replace(cfg, family="ompr_l", l=1), init)


def run_iht_newton(A, b, cfg: AlgorithmConfig, init=None):
    """IHT-Newton (HTP) is OMPR(k)."""
    return run_omprl(A, b, dataclasses.replace(cfg, family="ompr_l", l=cfg.k), init)


def run_omp(A, b, cfg: AlgorithmConfig) -> tuple[RecoveryState, RecoveryTrace]:
    """Orthogonal matching pursuit from the empty support, at most k additions."""
    A, b = _prepare(A, b, cfg, "omp")
    n = A.shape[1]
    state = RecoveryState(x=np.zeros(n), support=np.empty(0, dtype=np.int64),
                          objective=0.5 * float(b @ b), iteration=0, residual=b.copy())

    def step(s: RecoveryState) -> Step | None:
        g = np.abs(A.T @ s.residual)
        g[s.support] = -1.0
        j = int(np.argmax(g))  # first maximiser, so lower index wins ties
        if g[j] <= 0.0:
            return None
        return Step(np.union1d(s.support, [j]).astype(np.int64),
                    np.array([j], dtype=np.int64), np.empty(0, dtype=np.int64))

    return _drive(A, b, cfg, state, step, max_iters=min(cfg.k, cfg.max_iters))


def run_two_stage(A, b, cfg: AlgorithmConfig, init=None) -> tuple[RecoveryState, RecoveryTrace]:
    """Two-stage hard thresholding with replacement size l.

    Enlarge the support by the l largest residual correlations, solve least
    squares on the k + l columns, keep the k largest coefficients and solve
    again on those.
    """
    A, b = _prepare(A, b, cfg, "two_stage")
    n = A.shape[1]
    state = _initial_state(A, b, cfg, init)

    def step(s: RecoveryState) -> Step:
        g = np.abs(A.T @ s.residual)
        outside = np.ones(n, dtype=bool)
        outside[s.support] = False
        candidates = np.flatnonzero(outside)
        J = np.union1d(s.support, candidates[top_indices(g[candidates], cfg.l)])
        z = state_on_support(A, b, J, s.iteration)
        keep = J[top_indices(np.abs(z.x[J]), cfg.k)]
        return Step(keep,
                    np.setdiff1d(keep, s.support, assume_unique=True),
                    np.setdiff1d(s.support, keep, assume_unique=True),
                    {"enlarged": J})

    return _drive(A, b, cfg, state, step)


def run_cosamp(A, b, cfg: AlgorithmConfig, init=None):
    return run_two_stage(A, b, dataclasses.replace(cfg, family="two_stage", l=2 * cfg.k), init)


def run_subspace_pursuit(A, b, cfg: AlgorithmConfig, init=None):
    return run_two_stage(A, b, dataclasses.replace(cfg, family="two_stage", l=cfg.k), init)


def traces_identical(t1: RecoveryTrace, t2: RecoveryTrace) -> bool:
    """Bitwise equality of two traces (supports, coefficients, objectives)."""
    if t1.status != t2.status or len(t1.snapshots) != len(t2.snapshots):
        return False
    for a, b in zip(t1.snapshots, t2.snapshots):
        if (a.iteration != b.iteration or a.objective != b.objective
                or not np.array_equal(a.support, b.support)
                or not np.array_equal(a.values, b.values)
                or not np.array_equal(a.found, b.found)
                or not np.array_equal(a.lost, b.lost)):
            return False
    return True


def support_sequence(trace: RecoveryTrace) -> Sequence[tuple[int, ...]]:
    return [tuple(int(i) for i in s.support) for s in trace.snapshots]
