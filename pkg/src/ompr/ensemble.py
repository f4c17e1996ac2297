"""Random problem instances: Gaussian matrices, +-1 sparse signals, noise.

All randomness comes from Philox, a counter-based generator, keyed through
``numpy.random.SeedSequence(seed, spawn_key=stream)``. A (seed, stream) pair
names one independent stream, so trials that run in parallel never share
state and any single trial can be replayed from its seed alone.

Streams used by a problem built from seed ``s``:

    (s, 0)  measurement matrix
    (s, 1)  support and signs of x*
    (s, 2)  noise vector
"""
from __future__ import annotations

import dataclasses
import struct
from dataclasses import dataclass
from typing import BinaryIO

import numpy as np

from .errors import BadArguments, DegenerateColumn, FormatError
from .linalg import as_matrix, as_support, read_matrix, write_matrix

MATRIX_STREAM, SIGNAL_STREAM, NOISE_STREAM = 0, 1, 2
PROBLEM_MAGIC = b"PEXT"
CONSISTENCY_TOL = 1e-12


def rng_stream(seed: int, *stream: int) -> np.random.Generator:
    """Independent Philox generator for the stream named by (seed, *stream)."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(seed: int, *stream: int) -> int:
    """Hash (seed, *stream) to a fresh u64 seed."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(s) for s in stream))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass
class MeasurementProblem:
    A: np.ndarray
    b: np.ndarray
    x_true: np.ndarray | None = None
    support: np.ndarray | None = None
    noise: np.ndarray | None = None
    seed: int = 0

    @property
    def shape(self) -> tuple[int, int]:
        return self.A.shape

    @property
    def has_truth(self) -> bool:
        return self.x_true is not None

    @property
    def noiseless(self) -> bool:
        return self.noise is None or not np.any(self.noise)

    def check(self) -> None:
        """Re-verify ``b = A x* + e`` and unit column norms."""
        norms = np.linalg.norm(self.A, axis=0)
        if np.max(np.abs(norms - 1.0)) > CONSISTENCY_TOL:
            raise BadArguments("columns of A are not unit norm")
        if self.x_true is None:
            return
        expected = self.A @ self.x_true
        if self.noise is not None:
            expected = expected + self.noise
        scale = max(1.0, float(np.linalg.norm(self.b)))
        if np.max(np.abs(expected - self.b)) > CONSISTENCY_TOL * scale:
            raise BadArguments("b is inconsistent with A x* + e")


def gaussian_matrix(m: int, n: int, seed: int) -> np.ndarray:
    """m x n matrix of i.i.d. N(0, 1) entries with columns scaled to unit norm."""
    if m < 1 or n < 1:
        raise BadArguments(f"m and n must be positive, got {m}, {n}")
    rng = rng_stream(seed, MATRIX_STREAM)
    # drawing (n, m) and transposing gives column-major storage directly
    A = rng.standard_normal((n, m)).T
    norms = np.linalg.norm(A, axis=0)
    for j in np.flatnonzero(norms == 0.0):
        col = rng_stream(seed, MATRIX_STREAM, int(j) + 1).standard_normal(m)
        if not np.any(col):
            raise DegenerateColumn(f"column {j} is identically zero after a redraw")
        A[:, j] = col
        norms[j] = np.linalg.norm(col)
    A /= norms
    return A


def sparse_signal(n: int, k: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Uniform random k-subset support carrying independent +-1 entries."""
    if k < 0 or k > n:
        raise BadArguments(f"k = {k} must lie in [0, n = {n}]")
    rng = rng_stream(seed, SIGNAL_STREAM)
    support = np.sort(rng.choice(n, size=k, replace=False)).astype(np.int64)
    x = np.zeros(n)
    x[support] = rng.choice(np.array([-1.0, 1.0]), size=k)
    return x, support


def add_noise(problem: MeasurementProblem, level: float, seed: int) -> MeasurementProblem:
    """Replace b by ``A x* + e`` with Gaussian e scaled so ``||e|| = level * ||A x*||``."""
    if problem.x_true is None:
        raise BadArguments("add_noise needs a problem with ground truth")
    if level < 0:
        raise BadArguments(f"noise level must be non-negative, got {level}")
    clean = problem.A @ problem.x_true
    m = clean.shape[0]
    e = np.zeros(m)
    target = level * float(np.linalg.norm(clean))
    if target > 0:
        e = rng_stream(seed, NOISE_STREAM).standard_normal(m)
        e *= target / np.linalg.norm(e)
    noisy = dataclasses.replace(problem, b=clean + e, noise=e)
    noisy.check()
    return noisy


def make_problem(m: int, n: int, k: int, seed: int, noise_level: float = 0.0) -> MeasurementProblem:
    A = gaussian_matrix(m, n, seed)
    x, support = sparse_signal(n, k, seed)
    problem = MeasurementProblem(A=A, b=A @ x, x_true=x, support=support, seed=int(seed))
    if noise_level > 0:
        problem = add_noise(problem, noise_level, seed)
    problem.check()
    return problem


# -- binary container ---------------------------------------------------------
# SREC1 matrix block, then:
#   magic "PEXT" | seed: u64 | flags: u8 (1 = truth, 2 = noise) | b: m float64
#   [truth] x*: n float64 | count: u32 | support: count u32
#   [noise] e: m float64

def write_problem(fh: BinaryIO, problem: MeasurementProblem) -> None:
    write_matrix(fh, problem.A)
    flags = (1 if problem.x_true is not None else 0) | (2 if problem.noise is not None else 0)
    fh.write(PROBLEM_MAGIC)
    fh.write(struct.pack("<QB", int(problem.seed) & (2**64 - 1), flags))
    fh.write(np.asarray(problem.b, dtype="<f8").tobytes())
    if problem.x_true is not None:
        fh.write(np.asarray(problem.x_true, dtype="<f8").tobytes())
        support = np.asarray(problem.support, dtype="<u4")
        fh.write(struct.pack("<I", support.size))
        fh.write(support.tobytes())
    if problem.noise is not None:
        fh.write(np.asarray(problem.noise, dtype="<f8").tobytes())


def _read_exact(fh: BinaryIO, size: int) -> bytes:
    data = fh.read(size)
    if len(data) != size:
        raise FormatError("truncated problem block")
    return data


def read_problem(fh: BinaryIO) -> MeasurementProblem:
    A = read_matrix(fh)
    m, n = A.shape
    if _read_exact(fh, 4) != PROBLEM_MAGIC:
        raise FormatError("missing problem extension block")
    seed, flags = struct.unpack("<QB", _read_exact(fh, 9))
    b = np.frombuffer(_read_exact(fh, 8 * m), dtype="<f8").astype(np.float64)
    x_true = support = noise = None
    if flags & 1:
        x_true = np.frombuffer(_read_exact(fh, 8 * n), dtype="<f8").astype(np.float64)
        (count,) = struct.unpack("<I", _read_exact(fh, 4))
        raw = np.frombuffer(_read_exact(fh, 4 * count), dtype="<u4")
        support = as_support(raw.astype(np.int64), n)
    if flags & 2:
        noise = np.frombuffer(_read_exact(fh, 8 * m), dtype="<f8").astype(np.float64)
    return MeasurementProblem(A=as_matrix(A), b=b, x_true=x_true, support=support,
                              noise=noise, seed=seed)


def save_problem(path, problem: MeasurementProblem) -> None:
    with open(path, "wb") as fh:
        write_problem(fh, problem)


def load_problem(path) -> MeasurementProblem:
    with open(path, "rb") as fh:
        return read_problem(fh)


def perturbed_identity(n: int, eps: float, seed: int) -> np.ndarray:
    """Square near-isometry: columns of ``I + eps * G / sqrt(n)`` scaled to unit norm.

    Small `eps` gives small RIP constants at every order, which makes it the
    natural test bed for checks gated on those constants.
    """
    if n < 1 or eps < 0:
        raise BadArguments(f"need n >= 1 and eps >= 0, got {n}, {eps}")
    G = rng_stream(seed, MATRIX_STREAM).standard_normal((n, n)).T
    A = np.eye(n) + eps * G / np.sqrt(n)
    A /= np.linalg.norm(A, axis=0)
    return np.asfortranarray(A)
