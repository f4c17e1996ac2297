"""Sign-random-projection LSH over matrix columns, and OMPR with hashed selection.

Each of the q tables hashes a vector v to the s-bit key whose bit i is
``u_i^T v >= 0`` for that table's Gaussian hyperplanes u_1..u_s (so sign(0)
counts as +1). Two unit vectors at angle theta share a bit with probability
``1 - theta / pi``.

Tables are stored sorted by key: ``sorted_keys[t]`` holds the keys of table t
in ascending order and ``order[t]`` the column indices in the same order, with
ties kept in ascending column order. A bucket is a contiguous run of equal keys.
"""
from __future__ import annotations

import dataclasses
import math
import struct
import time
from dataclasses import dataclass
from typing import BinaryIO

import numpy as np

from .algorithms import AlgorithmConfig, RecoveryState, RecoveryTrace, Step, _drive, _initial_state, _prepare
from .ensemble import rng_stream
from .errors import BadArguments, FormatError
from .linalg import as_matrix, as_support
from .thresholding import partial_hard_threshold, top_indices

__all__ = [
    "LshIndex",
    "QueryReport",
    "default_params",
    "build_index",
    "hash_keys",
    "query_max_abs_correlation",
    "run_ompr_hash",
    "collision_probability",
    "collision_frequency",
    "save_index",
    "load_index",
]

INDEX_MAGIC = b"SLSH1"
HYPERPLANE_STREAM = 10
PROBE_STREAM = 11
FALLBACKS = ("exact", "skip")


@dataclass
class LshIndex:
    s: int
    q: int
    seed: int
    hyperplanes: np.ndarray   # (q * s, m); rows t*s .. t*s+s-1 belong to table t
    sorted_keys: np.ndarray   # (q, n) uint64
    order: np.ndarray         # (q, n) int32
    _flat: np.ndarray | None = dataclasses.field(default=None, repr=False, compare=False)

    @property
    def n(self) -> int:
        return self.order.shape[1]

    @property
    def m(self) -> int:
        return self.hyperplanes.shape[1]

    def table(self, t: int) -> dict[int, list[int]]:
        """Table `t` as a plain key -> column list mapping."""
        keys, starts = np.unique(self.sorted_keys[t], return_index=True)
        bounds = list(starts) + [self.n]
        return {int(key): self.order[t, bounds[i]:bounds[i + 1]].tolist()
                for i, key in enumerate(keys)}


@dataclass
class QueryReport:
    candidates_examined: int
    chosen: int | None
    exact_fallback_used: bool = False
    cosine: float = 0.0      # |<A_j, r>| / ||r|| of the LSH winner
    exact_ratio: float | None = None  # LSH winner / exact winner, when the exact scan ran


def default_params(n: int) -> tuple[int, int]:
    """s = ceil(log2 n) bits and q = ceil(sqrt n) tables."""
    s = max(1, min(63, math.ceil(math.log2(max(n, 2)))))
    q = max(1, math.ceil(math.sqrt(n)))
    return s, q


def _pack(bits: np.ndarray) -> np.ndarray:
    # bits: (..., s) bool -> uint64 keys with bit i taken from position i
    weights = np.left_shift(np.uint64(1), np.arange(bits.shape[-1], dtype=np.uint64))
    return np.bitwise_or.reduce(np.where(bits, weights, np.uint64(0)), axis=-1)


def hash_keys(hyperplanes: np.ndarray, s: int, X: np.ndarray) -> np.ndarray:
    """Keys of the columns of X under every table: shape (q, X.shape[1])."""
    proj = hyperplanes @ X
    q = hyperplanes.shape[0] // s
    bits = (proj >= 0).reshape(q, s, -1).transpose(0, 2, 1)
    return _pack(bits)


def build_index(A, s: int, q: int, seed: int, batch: int = 8) -> LshIndex:
    """Hash every column of A into q tables of s-bit keys."""
    A = as_matrix(A)
    m, n = A.shape
    if not 1 <= s <= 63:
        raise BadArguments(f"s must lie in [1, 63], got {s}")
    if q < 1:
        raise BadArguments(f"q must be positive, got {q}")
    hyperplanes = rng_stream(seed, HYPERPLANE_STREAM).standard_normal((q * s, m))
    sorted_keys = np.empty((q, n), dtype=np.uint64)
    order = np.empty((q, n), dtype=np.int32)
    for t0 in range(0, q, batch):
        t1 = min(q, t0 + batch)
        keys = hash_keys(hyperplanes[t0 * s:t1 * s], s, A)
        for t in range(t0, t1):
            idx = np.argsort(keys[t - t0], kind="stable")
            order[t] = idx
            sorted_keys[t] = keys[t - t0][idx]
    index = LshIndex(s=s, q=q, seed=int(seed), hyperplanes=hyperplanes,
                     sorted_keys=sorted_keys, order=order)
    _flat_keys(index)
    return index


def _flat_keys(index: LshIndex) -> np.ndarray | None:
    # keys offset by (table << s) form one ascending array, so a single
    # searchsorted serves all tables; needs s + bits(q) <= 64
    if index.s + max(1, (index.q - 1).bit_length()) > 64:
        return None
    if index._flat is None:
        offsets = np.left_shift(np.arange(index.q, dtype=np.uint64), np.uint64(index.s))
        index._flat = (index.sorted_keys + offsets[:, None]).ravel()
    return index._flat


def _bucket_members(index: LshIndex, query_keys: np.ndarray) -> np.ndarray:
    """Union of the buckets hit by ``query_keys`` (shape (q, c)), ascending."""
    n = index.n
    flat = _flat_keys(index)
    if flat is not None:
        offsets = np.left_shift(np.arange(index.q, dtype=np.uint64), np.uint64(index.s))
        probes = (query_keys + offsets[:, None]).ravel()
        lo = np.searchsorted(flat, probes, side="left")
        hi = np.searchsorted(flat, probes, side="right")
        hit = hi > lo
        lo, hi = lo[hit], hi[hit]
        if lo.size == 0:
            return np.empty(0, dtype=np.int64)
        lengths = hi - lo
        # expand the [lo, hi) ranges into one position array
        starts = np.repeat(lo - np.cumsum(lengths) + lengths, lengths)
        positions = starts + np.arange(int(lengths.sum()))
        return np.unique(index.order.ravel()[positions].astype(np.int64))
    pieces = []
    for t in range(index.q):
        row = index.sorted_keys[t]
        lo = np.searchsorted(row, query_keys[t], side="left")
        hi = np.searchsorted(row, query_keys[t], side="right")
        for a, b in zip(lo, hi):
            if b > a:
                pieces.append(index.order[t, a:b])
    if not pieces:
        return np.empty(0, dtype=np.int64)
    members = np.unique(np.concatenate(pieces).astype(np.int64))
    assert members.size <= n
    return members


def query_max_abs_correlation(index: LshIndex, A, r, exclude=()) -> tuple[int | None, QueryReport]:
    """Most correlated column among the buckets of r and -r.

    Returns ``(None, report)`` when no candidate survives the exclusion.
    """
    return _query(index, as_matrix(A), np.asarray(r, dtype=np.float64), exclude)


def _query(index: LshIndex, A: np.ndarray, r: np.ndarray, exclude) -> tuple[int | None, QueryReport]:
    proj = (index.hyperplanes @ r).reshape(index.q, index.s)
    keys = np.stack([_pack(proj >= 0), _pack(-proj >= 0)], axis=1)
    candidates = _bucket_members(index, keys)
    if len(exclude):
        candidates = np.setdiff1d(candidates, as_support(exclude, index.n), assume_unique=True)
    if candidates.size == 0:
        return None, QueryReport(candidates_examined=0, chosen=None)
    corr = np.abs(A[:, candidates].T @ r)
    best = int(np.argmax(corr))
    rnorm = float(np.linalg.norm(r))
    j = int(candidates[best])
    return j, QueryReport(candidates_examined=int(candidates.size), chosen=j,
                          cosine=float(corr[best]) / rnorm if rnorm > 0 else 0.0)


def run_ompr_hash(A, b, cfg: AlgorithmConfig, index: LshIndex, fallback: str = "exact",
                  init=None) -> tuple[RecoveryState, RecoveryTrace]:
    """OMPR whose entering column is chosen by an LSH query on the residual.

    With ``fallback="exact"`` a full correlation scan replaces the LSH answer
    whenever the query returns nothing, a zero correlation, or a column that
    would not enter the support; the scan then picks exactly as OMPR would.
    With ``fallback="skip"`` an empty or zero answer stops the run as Stalled.
    """
    if fallback not in FALLBACKS:
        raise BadArguments(f"fallback must be one of {FALLBACKS}, got {fallback!r}")
    A, b = _prepare(A, b, cfg, "ompr_l")
    if cfg.l != 1:
        raise BadArguments("OMPR-Hash replaces one coordinate per iteration (l = 1)")
    if index.n != A.shape[1] or index.m != A.shape[0]:
        raise BadArguments("index was built for a different matrix shape")
    state = _initial_state(A, b, cfg, init)
    eta, k = cfg.eta, cfg.k

    def step(s: RecoveryState) -> Step | None:
        I = s.support
        j, report = _query(index, A, s.residual, I)
        if j is not None:
            corr = float(A[:, j] @ s.residual)
            if corr != 0.0:
                J = np.append(I, j)
                zJ = np.append(s.x[I] + eta * (A[:, I].T @ s.residual), eta * corr)
                keep_pos = top_indices(np.abs(zJ), k)
                keep = np.sort(J[keep_pos])
                entered = keep_pos[-1] == k  # position k holds the new column
                if entered or fallback == "skip":
                    return Step(keep, np.setdiff1d(keep, I), np.setdiff1d(I, keep),
                                {"query": report})
        if fallback == "skip":
            return None
        z = s.x + eta * (A.T @ s.residual)
        th = partial_hard_threshold(z, I, 1, k)
        outside = np.ones(A.shape[1], dtype=bool)
        outside[I] = False
        exact_best = float(np.max(np.abs(z[outside]))) / eta
        report = dataclasses.replace(
            report, exact_fallback_used=True,
            chosen=int(th.found[0]) if th.found.size else report.chosen,
            exact_ratio=(report.cosine * float(np.linalg.norm(s.residual)) / exact_best
                         if exact_best > 0 else None))
        return Step(th.support, th.found, th.lost, {"query": report})

    return _drive(A, b, cfg, state, step)


# -- collision statistics -------------------------------------------------------

def collision_probability(x1, x2) -> float:
    """``1 - arccos(cos angle) / pi`` for the angle between x1 and x2."""
    c = float(np.dot(x1, x2) / (np.linalg.norm(x1) * np.linalg.norm(x2)))
    return 1.0 - math.acos(max(-1.0, min(1.0, c))) / math.pi


def collision_frequency(x1, x2, num_hyperplanes: int, seed: int, chunk: int = 100000) -> float:
    """Fraction of fresh Gaussian hyperplanes giving x1 and x2 the same sign bit."""
    x1 = np.asarray(x1, dtype=np.float64)
    x2 = np.asarray(x2, dtype=np.float64)
    rng = rng_stream(seed, PROBE_STREAM)
    hits = 0
    done = 0
    while done < num_hyperplanes:
        size = min(chunk, num_hyperplanes - done)
        U = rng.standard_normal((size, x1.shape[0]))
        hits += int(np.count_nonzero((U @ x1 >= 0) == (U @ x2 >= 0)))
        done += size
    return hits / num_hyperplanes


# -- binary container -------------------------------------------------------------
# magic "SLSH1" | s: u32 | q: u32 | seed: u64 | m: u32 | n: u32
# hyperplanes: q*s*m float64, hyperplane-major (table t owns rows t*s .. t*s+s-1)
# per table: buckets: u32 | keys: buckets u64 ascending | counts: buckets u32
#            | members: n u32, bucket contents concatenated in key order

def write_index(fh: BinaryIO, index: LshIndex) -> None:
    fh.write(INDEX_MAGIC)
    fh.write(struct.pack("<IIQII", index.s, index.q, index.seed & (2**64 - 1), index.m, index.n))
    fh.write(np.ascontiguousarray(index.hyperplanes, dtype="<f8").tobytes())
    for t in range(index.q):
        keys, counts = np.unique(index.sorted_keys[t], return_counts=True)
        fh.write(struct.pack("<I", keys.size))
        fh.write(keys.astype("<u8").tobytes())
        fh.write(counts.astype("<u4").tobytes())
        fh.write(index.order[t].astype("<u4").tobytes())


def read_index(fh: BinaryIO) -> LshIndex:
    def take(size: int) -> bytes:
        data = fh.read(size)
        if len(data) != size:
            raise FormatError("truncated index")
        return data

    if take(len(INDEX_MAGIC)) != INDEX_MAGIC:
        raise FormatError("bad index magic")
    s, q, seed, m, n = struct.unpack("<IIQII", take(24))
    hyperplanes = np.frombuffer(take(8 * q * s * m), dtype="<f8").reshape(q * s, m).astype(np.float64)
    sorted_keys = np.empty((q, n), dtype=np.uint64)
    order = np.empty((q, n), dtype=np.int32)
    for t in range(q):
        (buckets,) = struct.unpack("<I", take(4))
        keys = np.frombuffer(take(8 * buckets), dtype="<u8")
        counts = np.frombuffer(take(4 * buckets), dtype="<u4")
        if int(counts.sum()) != n:
            raise FormatError(f"table {t} does not cover all {n} columns")
        sorted_keys[t] = np.repeat(keys, counts)
        order[t] = np.frombuffer(take(4 * n), dtype="<u4")
    return LshIndex(s=s, q=q, seed=seed, hyperplanes=hyperplanes,
                    sorted_keys=sorted_keys, order=order)


def save_index(path, index: LshIndex) -> None:
    with open(path, "wb") as fh:
        write_index(fh, index)


def load_index(path) -> LshIndex:
    with open(path, "rb") as fh:
        return read_index(fh)


def timed(fn, *args, **kwargs):
    """Call ``fn`` and return ``(result, wall seconds)``."""
    start = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - start
