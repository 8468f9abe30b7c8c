"""Synthetic least-squares problems, matrix diagnostics, and the direct solver.

Problem instances are tall dense systems ``min_x ||A x - b||_2`` with A stored
as a C-contiguous float64 array.  The synthetic generators draw rows from a
multivariate normal (GA) or multivariate t with 5/3/1 degrees of freedom
(T5/T3/T1), all sharing the covariance ``Sigma_ij = 2 * 0.5**|i-j|``, and
plant a known signal so that ``b = A x + eps`` with iid N(0, 0.09^2) noise.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

GENERATOR_KINDS = ("GA", "T5", "T3", "T1")

_NOISE_STD = 0.09
_MAGIC = b"SKTLSQ01"


class RankDeficiencyError(RuntimeError):
    """Raised when an operation requires a full-column-rank matrix."""


def as_matrix(a) -> np.ndarray:
    """Validate and return a 2-D C-contiguous float64 matrix with finite entries."""
    a = np.ascontiguousarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"expected a 2-D matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix entries must be finite")
    return a


@dataclass
class LsProblem:
    """A least-squares instance (A, b) with an optional cached direct solution."""

    A: np.ndarray
    b: np.ndarray
    label: str = "custom"
    seed: int | None = None
    x_star: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.A = as_matrix(self.A)
        self.b = np.ascontiguousarray(self.b, dtype=np.float64).reshape(-1)
        m, n = self.A.shape
        if m < n:
            raise ValueError(f"need m >= n, got {m} x {n}")
        if self.b.shape[0] != m:
            raise ValueError(f"b has length {self.b.shape[0]}, expected {m}")

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.A.shape[1]


@dataclass(frozen=True)
class MatrixDiagnostics:
    """Coherence and conditioning summary of a tall matrix."""

    coherence_mu: float          # m * max_i ||U_(i)||^2, in [n, m]
    coherence_normalized: float  # coherence_mu / m, in [n/m, 1]
    condition_number: float


def planted_signal(n: int) -> np.ndarray:
    """The planted coefficient vector: 1 on the first and last 10 entries,
    0.1 elsewhere; all ones when n < 20."""
    if n < 20:
        return np.ones(n)
    x = np.full(n, 0.1)
    x[:10] = 1.0
    x[-10:] = 1.0
    return x


def _row_covariance_cholesky(n: int) -> np.ndarray:
    idx = np.arange(n)
    sigma = 2.0 * 0.5 ** np.abs(idx[:, None] - idx[None, :])
    return np.linalg.cholesky(sigma)


def generate_problem(kind: str, m: int, n: int, seed: int) -> LsProblem:
    """Generate a synthetic problem of the given kind.

    Draw order is fixed (normals, then chi-square mixing for t kinds, then
    noise) so results are bit-reproducible for a given (kind, m, n, seed).

    Parameters
    ----------
    kind : {"GA", "T5", "T3", "T1"}
        Row distribution: Gaussian, or multivariate t with 5/3/1 dof.
    m, n : int
        Problem shape, m >= n >= 1.
    seed : int
        Seed for the generator.
    """
    if kind not in GENERATOR_KINDS:
        raise ValueError(f"unknown generator kind {kind!r}")
    if not (m >= n >= 1):
        raise ValueError(f"need m >= n >= 1, got m={m}, n={n}")
    rng = np.random.default_rng(seed)
    chol = _row_covariance_cholesky(n)
    A = rng.standard_normal((m, n)) @ chol.T
    if kind != "GA":
        dof = {"T5": 5.0, "T3": 3.0, "T1": 1.0}[kind]
        w = rng.chisquare(dof, size=m)
        A /= np.sqrt(w / dof)[:, None]
    x = planted_signal(n)
    noise = rng.normal(0.0, _NOISE_STD, size=m)
    b = A @ x + noise
    return LsProblem(A=A, b=b, label=kind, seed=seed)


def diagnostics(A) -> MatrixDiagnostics:
    """Coherence and condition number from the left singular vectors of A.

    Coherence is ``mu(A) = m * max_i ||U_(i)||_2^2`` for U an orthonormal
    basis of range(A); the normalized value mu(A)/m lies in [n/m, 1].
    """
    A = as_matrix(A)
    m, n = A.shape
    U, s, _ = sla.svd(A, full_matrices=False)
    if s[-1] <= s[0] * max(m, n) * np.finfo(np.float64).eps:
        raise RankDeficiencyError("matrix is numerically rank-deficient")
    row_norms_sq = np.einsum("ij,ij->i", U, U)
    mu = m * float(np.max(row_norms_sq))
    return MatrixDiagnostics(
        coherence_mu=mu,
        coherence_normalized=mu / m,
        condition_number=float(s[0] / s[-1]),
    )


def direct_solve(problem: LsProblem) -> np.ndarray:
    """Reference minimizer of ||A x - b||_2, cached on the problem.

    Column-pivoted QR with a triangular solve; falls back to an SVD-based
    least-squares solve when R is numerically singular.
    """
    A, b = problem.A, problem.b
    n = A.shape[1]
    Q, R, piv = sla.qr(A, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag.min() <= diag.max() * n * np.finfo(np.float64).eps:
        x, _, rank, _ = np.linalg.lstsq(A, b, rcond=None)
        if rank < n:
            raise RankDeficiencyError("matrix is numerically rank-deficient")
    else:
        y = sla.solve_triangular(R, Q.T @ b, lower=False)
        x = np.empty(n)
        x[piv] = y
    problem.x_star = x
    return x


def task_descriptor(problem: LsProblem, with_diagnostics: bool = False):
    from .params import TaskDescriptor

    if with_diagnostics:
        d = diagnostics(problem.A)
        return TaskDescriptor(
            m=problem.m,
            n=problem.n,
            label=problem.label,
            coherence_normalized=d.coherence_normalized,
            condition_number=d.condition_number,
        )
    return TaskDescriptor(m=problem.m, n=problem.n, label=problem.label)


# ---------------------------------------------------------------------------
# Serialization: a simple binary container and dense text/CSV import.

def save_problem(path, problem: LsProblem) -> None:
    """Write the problem to a binary container.

    Layout: 8-byte magic, little-endian u32 version, u64 m, u64 n,
    i64 seed (-1 when absent), u32 label length + UTF-8 label, then A in
    row-major float64 followed by b.
    """
    label = problem.label.encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        seed = -1 if problem.seed is None else int(problem.seed)
        fh.write(struct.pack("<IQQq", 1, problem.m, problem.n, seed))
        fh.write(struct.pack("<I", len(label)))
        fh.write(label)
        fh.write(np.ascontiguousarray(problem.A).tobytes())
        fh.write(np.ascontiguousarray(problem.b).tobytes())


def load_problem(path) -> LsProblem:
    with open(path, "rb") as fh:
        if fh.read(8) != _MAGIC:
            raise ValueError(f"{path}: not a sketchtune problem container")
        version, m, n, seed = struct.unpack("<IQQq", fh.read(28))
        if version != 1:
            raise ValueError(f"{path}: unsupported container version {version}")
        (label_len,) = struct.unpack("<I", fh.read(4))
        label = fh.read(label_len).decode("utf-8")
        A = np.frombuffer(fh.read(8 * m * n), dtype="<f8").reshape(m, n).copy()
        b = np.frombuffer(fh.read(8 * m), dtype="<f8").copy()
    return LsProblem(A=A, b=b, label=label, seed=None if seed < 0 else seed)


def load_matrix_text(path, delimiter=None) -> np.ndarray:
    """Read a dense matrix from whitespace- or comma-separated text."""
    if delimiter is None:
        with open(path) as fh:
            first = fh.readline()
        delimiter = "," if "," in first else None
    return as_matrix(np.atleast_2d(np.loadtxt(path, delimiter=delimiter)))


def problem_from_text(matrix_path, rhs_path=None, label="custom") -> LsProblem:
    """Build a problem from text/CSV files.

    When ``rhs_path`` is omitted, the last column of the matrix file is used
    as the right-hand side.
    """
    M = load_matrix_text(matrix_path)
    if rhs_path is not None:
        b = load_matrix_text(rhs_path).reshape(-1)
        return LsProblem(A=M, b=b, label=label)
    if M.shape[1] < 2:
        raise ValueError("matrix file needs at least two columns when no rhs file is given")
    return LsProblem(A=np.ascontiguousarray(M[:, :-1]), b=M[:, -1].copy(), label=label)
