"""Dense kernels shared by every recovery routine.

Matrices are held as float64 numpy arrays in column-major (Fortran) order so
that gathering the columns of a support is a contiguous copy.
"""
from __future__ import annotations

import io
import itertools
import math
import struct
from dataclasses import dataclass
from typing import BinaryIO, Iterable

import numpy as np
import scipy.linalg

from .errors import BadArguments, DimensionMismatch, FormatError, RankDeficient, TooLarge

__all__ = [
    "RipEstimate",
    "as_matrix",
    "as_support",
    "least_squares_on_support",
    "residual_correlation",
    "objective",
    "rip_constant_exhaustive",
    "rip_constant_sampled",
    "conjugate_gradient",
    "write_matrix",
    "read_matrix",
    "save_matrix",
    "load_matrix",
    "matrix_bytes",
]

RANK_RTOL = 1e-10
MAX_SUBSETS = 10**6
MATRIX_MAGIC = b"SREC1"


@dataclass(frozen=True)
class RipEstimate:
    order: int
    delta: float
    method: str  # "exhaustive" or "sampled-lower-bound"


def as_matrix(A) -> np.ndarray:
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
        raise DimensionMismatch(f"expected a non-empty 2-d matrix, got shape {A.shape}")
    if not A.flags.f_contiguous:
        A = np.asfortranarray(A)
    if not np.all(np.isfinite(A)):
        raise BadArguments("matrix has non-finite entries")
    return A


def as_support(indices: Iterable[int], n: int) -> np.ndarray:
    """Return `indices` as a sorted int64 array, validating range and uniqueness."""
    idx = np.asarray(list(indices) if not isinstance(indices, np.ndarray) else indices,
                     dtype=np.int64).ravel()
    idx = np.sort(idx)
    if idx.size and (idx[0] < 0 or idx[-1] >= n):
        raise BadArguments(f"support index out of range [0, {n})")
    if idx.size > 1 and np.any(idx[1:] == idx[:-1]):
        raise BadArguments("support has duplicate indices")
    return idx


def _vector(v, length: int, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.shape[0] != length:
        raise DimensionMismatch(f"{name} has shape {v.shape}, expected ({length},)")
    return v


def objective(A: np.ndarray, x: np.ndarray, b: np.ndarray) -> float:
    """f(x) = 0.5 * ||Ax - b||^2."""
    r = A @ x - b
    return 0.5 * float(r @ r)


def conjugate_gradient(G: np.ndarray, rhs: np.ndarray, tol: float = 1e-10,
                       max_iter: int | None = None) -> np.ndarray:
    """Solve the symmetric positive semi-definite system ``G x = rhs`` by CG.

    Stops once ``||rhs - G x|| <= tol * ||rhs||`` or after `max_iter` steps
    (default ``10 * len(rhs)``).
    """
    n = rhs.shape[0]
    if max_iter is None:
        max_iter = 10 * n
    x = np.zeros(n)
    r = rhs.copy()
    p = r.copy()
    rs = float(r @ r)
    stop = (tol * math.sqrt(rs)) ** 2
    for _ in range(max_iter):
        if rs <= stop:
            break
        Gp = G @ p
        denom = float(p @ Gp)
        if denom <= 0.0:
            break
        alpha = rs / denom
        x += alpha * p
        r -= alpha * Gp
        rs_new = float(r @ r)
        p = r + (rs_new / rs) * p
        rs = rs_new
    return x


def _solve_columns(A_I: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Least-squares coefficients for the full-column-rank block `A_I`."""
    s = scipy.linalg.svdvals(A_I, check_finite=False)
    if s[-1] <= RANK_RTOL * s[0]:
        raise RankDeficient(
            f"restricted matrix is rank deficient (sigma_min/sigma_max = {s[-1] / s[0]:.3e})")
    G = A_I.T @ A_I
    rhs = A_I.T @ b
    try:
        factor = scipy.linalg.cho_factor(G, check_finite=False)
        coef = scipy.linalg.cho_solve(factor, rhs, check_finite=False)
        # one step of iterative refinement keeps A_I^T r at roundoff level
        coef += scipy.linalg.cho_solve(factor, A_I.T @ (b - A_I @ coef), check_finite=False)
    except np.linalg.LinAlgError:
        coef = conjugate_gradient(G, rhs, tol=1e-10, max_iter=10 * G.shape[0])
    return coef


def least_squares_on_support(A, b, I) -> np.ndarray:
    """Minimise ``||A x - b||`` over vectors supported on `I`.

    Entries outside `I` are exactly zero. Raises `RankDeficient` when the
    smallest singular value of ``A[:, I]`` is below ``1e-10`` times the largest.
    """
    A = as_matrix(A)
    m, n = A.shape
    b = _vector(b, m, "b")
    I = as_support(I, n)
    x = np.zeros(n)
    if I.size == 0:
        return x
    if I.size > m:
        raise RankDeficient(f"|I| = {I.size} exceeds m = {m}")
    x[I] = _solve_columns(A[:, I], b)
    return x


def residual_correlation(A, x, b) -> np.ndarray:
    """Return ``A^T (b - A x)``."""
    A = as_matrix(A)
    m, n = A.shape
    x = _vector(x, n, "x")
    b = _vector(b, m, "b")
    nz = np.flatnonzero(x)
    r = b - A[:, nz] @ x[nz]
    return A.T @ r


def _gram_extremes(A: np.ndarray, G: np.ndarray | None,
                   subsets: np.ndarray) -> tuple[float, float]:
    if G is not None:
        sub = G[subsets[:, :, None], subsets[:, None, :]]
    else:
        cols = A[:, subsets]
        sub = np.einsum("mci,mcj->cij", cols, cols)
    w = np.linalg.eigvalsh(sub)
    return float(w[:, 0].min()), float(w[:, -1].max())


def _small_gram(A: np.ndarray) -> np.ndarray | None:
    # the full Gram matrix only pays off when it fits comfortably in memory
    return A.T @ A if A.shape[1] <= 4096 else None


def rip_constant_exhaustive(A, order: int, max_subsets: int = MAX_SUBSETS,
                            chunk: int = 20000) -> RipEstimate:
    """Exact restricted isometry constant of the given order.

    Enumerates every column subset of size `order` and takes the worst
    deviation of the Gram eigenvalues from 1, clamped to [0, 1].
    """
    A = as_matrix(A)
    n = A.shape[1]
    if order < 1 or order > n:
        raise BadArguments(f"order must lie in [1, {n}], got {order}")
    total = math.comb(n, order)
    if total > max_subsets:
        raise TooLarge(f"C({n}, {order}) = {total} subsets exceeds the guard {max_subsets}")
    G = _small_gram(A)
    lo, hi = math.inf, -math.inf
    combos = itertools.combinations(range(n), order)
    while True:
        block = np.array(list(itertools.islice(combos, chunk)), dtype=np.int64)
        if block.size == 0:
            break
        bl, bh = _gram_extremes(A, G, block.reshape(-1, order))
        lo, hi = min(lo, bl), max(hi, bh)
    delta = min(1.0, max(0.0, hi - 1.0, 1.0 - lo))
    return RipEstimate(order=order, delta=delta, method="exhaustive")


def rip_constant_sampled(A, order: int, samples: int = 10000, seed: int = 0) -> RipEstimate:
    """Lower bound on the RIP constant from randomly drawn supports.

    Only a lower bound: it can never certify that a RIP hypothesis holds.
    """
    A = as_matrix(A)
    n = A.shape[1]
    if order < 1 or order > n:
        raise BadArguments(f"order must lie in [1, {n}], got {order}")
    rng = np.random.default_rng(seed)
    G = _small_gram(A)
    subsets = np.array([np.sort(rng.choice(n, order, replace=False)) for _ in range(samples)])
    lo, hi = _gram_extremes(A, G, subsets)
    delta = min(1.0, max(0.0, hi - 1.0, 1.0 - lo))
    return RipEstimate(order=order, delta=delta, method="sampled-lower-bound")


# -- binary container ---------------------------------------------------------
# magic "SREC1" | m: u32 LE | n: u32 LE | m*n float64 LE, column-major

def write_matrix(fh: BinaryIO, A) -> None:
    A = as_matrix(A)
    m, n = A.shape
    fh.write(MATRIX_MAGIC)
    fh.write(struct.pack("<II", m, n))
    fh.write(A.astype("<f8").tobytes(order="F"))


def read_matrix(fh: BinaryIO) -> np.ndarray:
    magic = fh.read(len(MATRIX_MAGIC))
    if magic != MATRIX_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MATRIX_MAGIC!r}")
    header = fh.read(8)
    if len(header) != 8:
        raise FormatError("truncated header")
    m, n = struct.unpack("<II", header)
    payload = fh.read(8 * m * n)
    if len(payload) != 8 * m * n:
        raise FormatError("truncated matrix payload")
    A = np.frombuffer(payload, dtype="<f8").reshape((m, n), order="F")
    return np.array(A, dtype=np.float64, order="F")


def save_matrix(path, A) -> None:
    with open(path, "wb") as fh:
        write_matrix(fh, A)


def load_matrix(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return read_matrix(fh)


def matrix_bytes(A) -> bytes:
    buf = io.BytesIO()
    write_matrix(buf, A)
    return buf.getvalue()
