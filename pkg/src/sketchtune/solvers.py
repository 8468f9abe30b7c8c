"""Sketch-and-precondition least-squares solvers.

The pipeline (``solve_sap``) sketches A with a sparse operator, factors the
sketch to build a right preconditioner M with ``(S A) M`` column-orthonormal,
computes a sketched presolve iterate, and then runs a preconditioned
iterative solver (LSQR or steepest-descent PGD) on
``min_z ||A M z - b||_2``, returning ``x = M z``.

Both solvers stop when ``||(AM)^T r|| / (ef * ||r||) <= rho`` with r = A x - b,
where ``ef`` estimates the Frobenius norm of A M: LSQR accumulates the norm
of the bidiagonalization (nondecreasing across iterations), while PGD uses
sqrt(n).  The residual-smallness test of classic LSQR (Paige & Saunders,
1982) is intentionally not used; it triggers spuriously at loose tolerances
on nearly consistent systems.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field
from math import sqrt

import numpy as np
import scipy.linalg as sla

from .params import Configuration
from .problems import LsProblem, as_matrix
from .sketching import apply, apply_vector, sample_operator


class PreconditionerError(RuntimeError):
    """The sketch factorization cannot produce a usable preconditioner."""


class SolveFailure(RuntimeError):
    """A solve aborted; carries the wall-clock seconds spent before the error."""

    def __init__(self, message, elapsed_seconds: float):
        super().__init__(message)
        self.elapsed_seconds = elapsed_seconds


class Termination(str, enum.Enum):
    TOLERANCE_MET = "tolerance_met"
    ITERATION_LIMIT = "iteration_limit"
    PRESOLVE_EXACT = "presolve_exact"
    STALLED = "stalled"  # zero search direction with unmet tolerance (PGD)


@dataclass
class Preconditioner:
    """Right preconditioner M mapping R^rank -> R^n.

    QR kind applies R^{-1} by triangular solve; SVD kind holds M = V S^{-1}
    explicitly (restricted to the numerical rank) and applies it as a dense
    product.  ``orth`` is the orthonormal factor of the sketch (Q or U),
    kept for the O(d n) presolve.
    """

    kind: str  # "QR" | "SVD"
    n: int
    rank: int
    r_factor: np.ndarray | None = field(default=None, repr=False)
    matrix: np.ndarray | None = field(default=None, repr=False)
    orth: np.ndarray | None = field(default=None, repr=False)

    def apply(self, z):
        """M @ z."""
        if self.kind == "QR":
            return sla.solve_triangular(self.r_factor, z, lower=False)
        return self.matrix @ z

    def apply_t(self, y):
        """M.T @ y."""
        if self.kind == "QR":
            return sla.solve_triangular(self.r_factor, y, lower=False, trans="T")
        return self.matrix.T @ y


@dataclass(frozen=True)
class SolverSettings:
    tolerance_rho: float
    max_iterations: int
    solver: str  # "LSQR" | "PGD"

    def __post_init__(self):
        if not (0.0 < self.tolerance_rho < 1.0):
            raise ValueError("tolerance_rho must lie in (0, 1)")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be >= 0")


@dataclass
class SolveReport:
    """Outcome of one solve: iterate, timing, and termination diagnostics."""

    x: np.ndarray
    wall_clock_seconds: float
    iterations: int
    termination: Termination
    frobenius_estimate_final: float
    criterion_final: float
    ef_history: np.ndarray
    arfe: float | None = None
    iterates: list | None = None
    sketch_rows: int | None = None


def settings_from_config(config: Configuration, n: int, max_iterations=None) -> SolverSettings:
    """Solver settings implied by a tuning configuration.

    The tolerance is ``rho = 10**-(6 + safety_factor)``; the iteration limit
    defaults to 4 n.
    """
    solver = "PGD" if config.sap_algorithm.endswith("PGD") else "LSQR"
    return SolverSettings(
        tolerance_rho=10.0 ** -(6 + config.safety_factor),
        max_iterations=4 * n if max_iterations is None else max_iterations,
        solver=solver,
    )


def build_preconditioner(A_hat, kind: str) -> Preconditioner:
    """Factor the d x n sketch so that A_hat @ M has orthonormal columns.

    QR: M = R^{-1}; raises PreconditionerError when R is numerically
    singular (relative diagonal magnitude below 1e-12).  SVD: M = V S^{-1}
    restricted to singular values above ``s_max * n * eps``.
    """
    A_hat = as_matrix(A_hat)
    d, n = A_hat.shape
    if d < n:
        raise ValueError(f"sketch must have d >= n, got {d} x {n}")
    if kind == "QR":
        Q, R = sla.qr(A_hat, mode="economic")
        diag = np.abs(np.diag(R))
        if diag.min() <= diag.max() * 1e-12:
            raise PreconditionerError("sketch QR factor is numerically singular")
        return Preconditioner(kind="QR", n=n, rank=n, r_factor=R, orth=Q)
    if kind == "SVD":
        U, s, Vt = sla.svd(A_hat, full_matrices=False)
        rank = int(np.sum(s > s[0] * n * np.finfo(np.float64).eps))
        if rank == 0:
            raise PreconditionerError("sketch is numerically zero")
        M = Vt[:rank].T / s[:rank]
        return Preconditioner(kind="SVD", n=n, rank=rank, matrix=M, orth=np.ascontiguousarray(U[:, :rank]))
    raise ValueError(f"unknown preconditioner kind {kind!r}")


def presolve(precond: Preconditioner, A_hat, sb) -> np.ndarray:
    """Sketched presolve: z0 = argmin_z ||A_hat M z - sb||_2.

    Because A_hat M equals the stored orthonormal factor, this is a single
    O(d n) product with the factor's transpose.  Callers should start the
    iterative solver at z0 only if ||A M z0 - b||^2 < ||b||^2, else at zero.
    """
    A_hat = np.asarray(A_hat)
    sb = np.asarray(sb, dtype=np.float64).reshape(-1)
    if A_hat.shape != (precond.orth.shape[0], precond.n):
        raise ValueError(f"sketch shape {A_hat.shape} inconsistent with preconditioner")
    if sb.shape[0] != A_hat.shape[0]:
        raise ValueError("sketched rhs length does not match sketch rows")
    return precond.orth.T @ sb


def _initial_state(A, b, precond, z0):
    z = np.zeros(precond.rank) if z0 is None else np.asarray(z0, dtype=np.float64).copy()
    if z.shape != (precond.rank,):
        raise ValueError(f"z0 has shape {z.shape}, expected ({precond.rank},)")
    if np.any(z):
        u = b - A @ precond.apply(z)
    else:
        u = b.copy()
    return z, u


def lsqr(A, b, precond: Preconditioner, z0, settings: SolverSettings,
         capture_iterates: bool = False) -> SolveReport:
    """Preconditioned LSQR via Golub-Kahan bidiagonalization.

    Recurrences follow Paige & Saunders (1982) restricted to the
    inconsistent-system stopping test; the Frobenius estimate is the
    accumulated norm of the bidiagonal matrix.
    """
    if settings.solver != "LSQR":
        raise ValueError("settings.solver must be 'LSQR'")
    t0 = time.perf_counter()
    A = np.asarray(A)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    rho_tol = settings.tolerance_rho
    ef_history = []

    z, u = _initial_state(A, b, precond, z0)
    iterates = []

    def _report(term, itn, crit, ef):
        return SolveReport(
            x=precond.apply(z),
            wall_clock_seconds=max(time.perf_counter() - t0, 1e-9),
            iterations=itn,
            termination=term,
            frobenius_estimate_final=ef,
            criterion_final=crit,
            ef_history=np.asarray(ef_history),
            iterates=iterates or None,
        )

    beta = float(np.linalg.norm(u))
    if beta == 0.0:
        return _report(Termination.PRESOLVE_EXACT, 0, 0.0, 0.0)
    u /= beta
    v = precond.apply_t(A.T @ u)
    alfa = float(np.linalg.norm(v))
    if alfa == 0.0:
        # (AM)^T r = 0 at the initial iterate: already optimal.
        return _report(Termination.TOLERANCE_MET, 0, 0.0, 0.0)
    v /= alfa
    w = v.copy()
    rhobar = alfa
    phibar = beta
    anorm = 0.0
    itn = 0

    while itn < settings.max_iterations:
        itn += 1
        u = A @ precond.apply(v) - alfa * u
        beta = float(np.linalg.norm(u))
        if beta > 0.0:
            u /= beta
            anorm = sqrt(anorm**2 + alfa**2 + beta**2)
            v = precond.apply_t(A.T @ u) - beta * v
            alfa = float(np.linalg.norm(v))
            if alfa > 0.0:
                v /= alfa
        else:
            anorm = sqrt(anorm**2 + alfa**2)

        cs, sn, rho = _sym_ortho(rhobar, beta)
        theta = sn * alfa
        rhobar = -cs * alfa
        phi = cs * phibar
        phibar = sn * phibar
        tau = sn * phi

        z += (phi / rho) * w
        w = v - (theta / rho) * w
        if capture_iterates:
            iterates.append(precond.apply(z))

        ef_history.append(anorm)
        rnorm = phibar
        arnorm = alfa * abs(tau)
        if rnorm == 0.0:
            return _report(Termination.TOLERANCE_MET, itn, 0.0, anorm)
        criterion = arnorm / (anorm * rnorm)
        if criterion <= rho_tol:
            return _report(Termination.TOLERANCE_MET, itn, criterion, anorm)

    criterion = arnorm / (anorm * rnorm) if itn else np.inf
    return _report(Termination.ITERATION_LIMIT, itn, criterion, anorm)


def _sym_ortho(a, b):
    """Stable Givens rotation (c, s, r) with [c s; s -c] @ [a; b] = [r; 0]."""
    if b == 0:
        return np.sign(a) if a != 0 else 1.0, 0.0, abs(a)
    if a == 0:
        return 0.0, np.sign(b), abs(b)
    if abs(b) > abs(a):
        tau = a / b
        s = np.sign(b) / sqrt(1 + tau * tau)
        c = s * tau
        r = b / s
    else:
        tau = b / a
        c = np.sign(a) / sqrt(1 + tau * tau)
        s = c * tau
        r = a / c
    return c, s, r


def pgd(A, b, precond: Preconditioner, z0, settings: SolverSettings,
        capture_iterates: bool = False) -> SolveReport:
    """Preconditioned steepest descent with exact line search.

    Each iteration forms the search direction ``dz = M^T A^T (b - A x)``,
    checks the stopping rule with ef = sqrt(n), and steps by the exact
    minimizer ``alpha = ||dz||^2 / ||A M dz||^2``.
    """
    if settings.solver != "PGD":
        raise ValueError("settings.solver must be 'PGD'")
    t0 = time.perf_counter()
    A = np.asarray(A)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    n = A.shape[1]
    ef = sqrt(n)
    rho_tol = settings.tolerance_rho
    ef_history = []
    iterates = []

    z, res = _initial_state(A, b, precond, z0)  # res = b - A M z

    def _report(term, itn, crit):
        return SolveReport(
            x=precond.apply(z),
            wall_clock_seconds=max(time.perf_counter() - t0, 1e-9),
            iterations=itn,
            termination=term,
            frobenius_estimate_final=ef,
            criterion_final=crit,
            ef_history=np.asarray(ef_history),
            iterates=iterates or None,
        )

    res_norm = float(np.linalg.norm(res))
    if res_norm == 0.0:
        return _report(Termination.PRESOLVE_EXACT, 0, 0.0)

    itn = 0
    while True:
        dz = precond.apply_t(A.T @ res)  # = -(AM)^T r with r = A x - b
        criterion = float(np.linalg.norm(dz)) / (ef * res_norm)
        ef_history.append(ef)
        if criterion <= rho_tol:
            return _report(Termination.TOLERANCE_MET, itn, criterion)
        if itn >= settings.max_iterations:
            return _report(Termination.ITERATION_LIMIT, itn, criterion)
        p = A @ precond.apply(dz)
        p_norm_sq = float(np.dot(p, p))
        if p_norm_sq == 0.0:
            return _report(Termination.STALLED, itn, criterion)
        alpha = float(np.dot(dz, dz)) / p_norm_sq
        z += alpha * dz
        res = res - alpha * p
        res_norm = float(np.linalg.norm(res))
        itn += 1
        if capture_iterates:
            iterates.append(precond.apply(z))
        if res_norm == 0.0:
            return _report(Termination.TOLERANCE_MET, itn, 0.0)


_PRECOND_KIND = {"QR-LSQR": "QR", "SVD-LSQR": "SVD", "SVD-PGD": "SVD"}


def solve_sap(problem: LsProblem, config: Configuration, seed: int,
              max_iterations=None) -> SolveReport:
    """Run the full sketch/precondition/presolve/iterate pipeline.

    Wall-clock time covers operator sampling, sketch application,
    factorization, presolve, and the iterative solve.  Raises SolveFailure
    (carrying elapsed seconds) when the preconditioner cannot be built.
    """
    if config.sap_algorithm not in _PRECOND_KIND:
        raise ValueError(f"unsupported algorithm pairing {config.sap_algorithm!r}")
    t0 = time.perf_counter()
    A, b = problem.A, problem.b
    m, n = A.shape
    d = max(int(round(config.sampling_factor * n)), 1)
    S = sample_operator(config.sketching_operator, d, m, config.vec_nnz, seed)
    A_hat = apply(S, A)
    sb = apply_vector(S, b)
    try:
        precond = build_preconditioner(A_hat, _PRECOND_KIND[config.sap_algorithm])
    except PreconditionerError as exc:
        raise SolveFailure(str(exc), time.perf_counter() - t0) from exc
    z_sk = presolve(precond, A_hat, sb)
    x_sk = precond.apply(z_sk)
    if np.linalg.norm(b - A @ x_sk) ** 2 < np.dot(b, b):
        z0 = z_sk
    else:
        z0 = None
    settings = settings_from_config(config, n, max_iterations=max_iterations)
    solver = lsqr if settings.solver == "LSQR" else pgd
    report = solver(A, b, precond, z0, settings)
    report.wall_clock_seconds = max(time.perf_counter() - t0, 1e-9)
    report.sketch_rows = d
    return report
