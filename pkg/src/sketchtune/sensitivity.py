"""Variance-based sensitivity analysis: Saltelli sampling, S1/ST estimators.

The design draws a scrambled Sobol sequence in 2*dim dimensions, splits it
into the A and B blocks, and forms the cross blocks AB_i (column i of A
replaced from B) and BA_i.  First-order indices use the Saltelli (2010)
estimator and total-effect indices the Jansen estimator; confidence
half-widths come from bootstrap resampling of the base sample rows.
Estimates are reported raw (small negative values are estimator noise).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

from .params import PARAMETER_NAMES, TuningSpace, encode
from .surrogate import gp_fit, gp_predict

_BOOTSTRAP_RESAMPLES = 50
_Z95 = 1.959963984540054


@dataclass
class SaltelliDesign:
    """Sample blocks of one Saltelli design over [0,1]^dim."""

    a: np.ndarray   # (base_n, dim)
    b: np.ndarray   # (base_n, dim)
    ab: np.ndarray  # (dim, base_n, dim)
    ba: np.ndarray  # (dim, base_n, dim)

    @property
    def dim(self) -> int:
        return self.a.shape[1]

    @property
    def base_n(self) -> int:
        return self.a.shape[0]

    def all_points(self) -> np.ndarray:
        """All base_n * (2 dim + 2) points, blocks stacked in order."""
        return np.vstack([self.a, self.b, self.ab.reshape(-1, self.dim),
                          self.ba.reshape(-1, self.dim)])


@dataclass
class SensitivityReport:
    """Per-parameter first-order and total-effect indices with intervals."""

    parameters: tuple
    s1: np.ndarray
    s1_conf: np.ndarray
    st: np.ndarray
    st_conf: np.ndarray
    sample_count: int
    degenerate: bool = False

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["parameter", "S1", "S1_conf", "ST", "ST_conf"])
            for i, name in enumerate(self.parameters):
                writer.writerow(
                    [name, repr(float(self.s1[i])), repr(float(self.s1_conf[i])),
                     repr(float(self.st[i])), repr(float(self.st_conf[i]))]
                )


def saltelli_sample(dim: int, base_n: int, seed) -> SaltelliDesign:
    """Saltelli design with a scrambled Sobol base sequence.

    ``base_n`` must be a power of two (the Sobol sequence is balanced only
    at powers of two).
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if base_n < 1 or (base_n & (base_n - 1)) != 0:
        raise ValueError(f"base_n must be a power of two, got {base_n}")
    sobol = qmc.Sobol(d=2 * dim, scramble=True, seed=seed)
    base = sobol.random_base2(int(np.log2(base_n))) if base_n > 1 else sobol.random(1)
    A = np.ascontiguousarray(base[:, :dim])
    B = np.ascontiguousarray(base[:, dim:])
    AB = np.empty((dim, base_n, dim))
    BA = np.empty((dim, base_n, dim))
    for i in range(dim):
        AB[i] = A
        AB[i, :, i] = B[:, i]
        BA[i] = B
        BA[i, :, i] = A[:, i]
    return SaltelliDesign(a=A, b=B, ab=AB, ba=BA)


def _evaluate_function(f, points):
    try:
        out = np.asarray(f(points), dtype=float).reshape(-1)
        if out.shape[0] == points.shape[0]:
            return out
    except Exception:
        pass
    return np.array([float(f(p)) for p in points])


def _indices_from_outputs(fA, fB, fAB):
    # Saltelli 2010 for S1, Jansen for ST; variance over the pooled A/B block.
    pooled = np.concatenate([fA, fB])
    center = pooled.mean()
    V = pooled.var()
    if V <= 0:
        dim = fAB.shape[0]
        return np.zeros(dim), np.zeros(dim), True
    fa = fA - center
    fb = fB - center
    fab = fAB - center
    s1 = np.mean(fb[None, :] * (fab - fa[None, :]), axis=1) / V
    st = 0.5 * np.mean((fa[None, :] - fab) ** 2, axis=1) / V
    return s1, st, False


def sobol_indices(f, dim: int, base_n: int = 512, seed=0,
                  n_boot: int = _BOOTSTRAP_RESAMPLES):
    """Estimate S1/ST of a black-box on [0,1]^dim.

    Returns a SensitivityReport with bootstrap confidence half-widths.  A
    zero-variance function yields all-zero indices with ``degenerate=True``.
    """
    design = saltelli_sample(dim, base_n, seed)
    fA = _evaluate_function(f, design.a)
    fB = _evaluate_function(f, design.b)
    fAB = np.vstack([_evaluate_function(f, design.ab[i]) for i in range(dim)])

    s1, st, degenerate = _indices_from_outputs(fA, fB, fAB)
    if degenerate:
        zeros = np.zeros(dim)
        return SensitivityReport(
            parameters=tuple(f"x{i + 1}" for i in range(dim)),
            s1=zeros, s1_conf=zeros.copy(), st=zeros.copy(), st_conf=zeros.copy(),
            sample_count=base_n * (2 * dim + 2), degenerate=True,
        )

    rng = np.random.default_rng(seed)
    boot_s1 = np.empty((n_boot, dim))
    boot_st = np.empty((n_boot, dim))
    for k in range(n_boot):
        idx = rng.integers(0, base_n, base_n)
        bs1, bst, _ = _indices_from_outputs(fA[idx], fB[idx], fAB[:, idx])
        boot_s1[k] = bs1
        boot_st[k] = bst
    return SensitivityReport(
        parameters=tuple(f"x{i + 1}" for i in range(dim)),
        s1=s1,
        s1_conf=_Z95 * boot_s1.std(axis=0, ddof=1),
        st=st,
        st_conf=_Z95 * boot_st.std(axis=0, ddof=1),
        sample_count=base_n * (2 * dim + 2),
        degenerate=False,
    )


def analyze_tuning(source, space: TuningSpace | None = None,
                   constants=None, base_n: int = 512, seed=0,
                   min_records: int = 20, pilot_records: int = 100) -> SensitivityReport:
    """Sensitivity of the tuning objective via a GP surrogate.

    ``source`` is either a list of evaluation records (at least
    ``min_records``) or a problem, in which case ``pilot_records`` LHS
    evaluations are collected first.  The analyzed function is the
    surrogate posterior mean of the log objective over the encoded
    five-dimensional cube.
    """
    from .problems import LsProblem

    space = space or TuningSpace()
    if isinstance(source, LsProblem):
        if constants is None:
            raise ValueError("constants are required when analyzing a problem directly")
        from .surrogate import random_search

        _, records = random_search(source, space, constants, pilot_records, seed)
    else:
        records = list(source)
    if len(records) < min_records:
        raise ValueError(f"need at least {min_records} records, got {len(records)}")

    X = np.vstack([encode(space, r.config) for r in records])
    y = np.log([r.objective_value for r in records])
    model = gp_fit(X, y, noise_floor=1e-6)

    def surrogate_mean(U):
        mean, _ = gp_predict(model, np.atleast_2d(U))
        return mean

    report = sobol_indices(surrogate_mean, dim=space.dim, base_n=base_n, seed=seed)
    return SensitivityReport(
        parameters=PARAMETER_NAMES,
        s1=report.s1,
        s1_conf=report.s1_conf,
        st=report.st,
        st_conf=report.st_conf,
        sample_count=report.sample_count,
        degenerate=report.degenerate,
    )
