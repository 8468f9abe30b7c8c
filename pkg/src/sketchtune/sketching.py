"""Sparse sketching operators: SJLT (column-sparse) and LessUniform (row-sparse).

An SJLT has independent columns: each column holds ``k`` entries equal to
+-1/sqrt(k) at distinct row positions.  A LessUniform operator has
independent rows: each row holds ``k`` entries equal to +-sqrt(m/(k*d)) at
distinct column positions.  Index sets are drawn uniformly without
replacement via a partial Fisher-Yates shuffle; the shuffle consumes
pre-drawn uniforms so sampling is bit-reproducible for a fixed seed.

Operators are stored along their generation axis (column-compressed for
SJLT, row-compressed for LessUniform) and applied through scipy.sparse,
which iterates the compressed axis and therefore streams a row-major right
operand cache-friendly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from numba import njit

SKETCH_KINDS = ("SJLT", "LessUniform")


@njit(cache=True)
def _fisher_yates_partial(uniforms, n_range, out):
    # Partial Fisher-Yates per group with swap undo: O(k) per group and one
    # shared scratch array, exact uniform sampling without replacement.
    ngroups, k = uniforms.shape
    scratch = np.arange(n_range)
    for g in range(ngroups):
        for i in range(k):
            j = i + int(uniforms[g, i] * (n_range - i))
            if j >= n_range:
                j = n_range - 1
            tmp = scratch[i]
            scratch[i] = scratch[j]
            scratch[j] = tmp
        for i in range(k):
            out[g, i] = scratch[i]
        for i in range(k - 1, -1, -1):
            j = i + int(uniforms[g, i] * (n_range - i))
            if j >= n_range:
                j = n_range - 1
            tmp = scratch[i]
            scratch[i] = scratch[j]
            scratch[j] = tmp


def _sample_index_sets(rng, ngroups: int, k: int, n_range: int) -> np.ndarray:
    uniforms = rng.random((ngroups, k))
    out = np.empty((ngroups, k), dtype=np.int64)
    _fisher_yates_partial(uniforms, n_range, out)
    return out


@dataclass
class SketchOperator:
    """A sampled sparse d x m sketching operator in compressed form.

    ``indices`` holds one row of index positions per compressed group
    (columns for SJLT, rows for LessUniform) and ``values`` the matching
    signed entries.
    """

    kind: str
    d: int
    m: int
    k: int  # effective nonzeros per column (SJLT) or row (LessUniform)
    indices: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    seed: int = 0
    _sparse: sp.spmatrix | None = field(default=None, repr=False, compare=False)

    def to_sparse(self) -> sp.spmatrix:
        """Compressed-sparse view along the generation axis (CSC / CSR)."""
        if self._sparse is None:
            ngroups, k = self.indices.shape
            indptr = np.arange(ngroups + 1, dtype=np.int64) * k
            if self.kind == "SJLT":
                self._sparse = sp.csc_matrix(
                    (self.values.ravel(), self.indices.ravel(), indptr),
                    shape=(self.d, self.m),
                )
            else:
                self._sparse = sp.csr_matrix(
                    (self.values.ravel(), self.indices.ravel(), indptr),
                    shape=(self.d, self.m),
                )
        return self._sparse

    def densify(self) -> np.ndarray:
        """Dense d x m materialization, filling entries in generation order."""
        S = np.zeros((self.d, self.m))
        if self.kind == "SJLT":
            for j in range(self.m):
                S[self.indices[j], j] = self.values[j]
        else:
            for i in range(self.d):
                S[i, self.indices[i]] = self.values[i]
        return S


def sample_operator(kind: str, d: int, m: int, k: int, seed: int) -> SketchOperator:
    """Sample a sparse sketching operator.

    ``k`` is clamped to d (SJLT) or m (LessUniform); the tuner may propose
    more nonzeros than the axis length at small sketch sizes.
    """
    if kind not in SKETCH_KINDS:
        raise ValueError(f"unknown sketch kind {kind!r}")
    if d < 1 or m < 1:
        raise ValueError(f"dimensions must be positive, got d={d}, m={m}")
    if k < 1:
        raise ValueError(f"k must be >= 1, got k={k}")
    rng = np.random.default_rng(seed)
    if kind == "SJLT":
        k_eff = min(k, d)
        indices = _sample_index_sets(rng, m, k_eff, d)
        scale = 1.0 / np.sqrt(k_eff)
        signs = rng.integers(0, 2, size=(m, k_eff)) * 2.0 - 1.0
    else:
        k_eff = min(k, m)
        indices = _sample_index_sets(rng, d, k_eff, m)
        scale = np.sqrt(m / (k_eff * d))
        signs = rng.integers(0, 2, size=(d, k_eff)) * 2.0 - 1.0
    return SketchOperator(
        kind=kind, d=d, m=m, k=k_eff, indices=indices, values=signs * scale, seed=seed
    )


def apply(S: SketchOperator, A) -> np.ndarray:
    """Compute the d x n sketch S @ A."""
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != S.m:
        raise ValueError(f"operand shape {A.shape} does not match operator m={S.m}")
    out = S.to_sparse() @ A
    return np.ascontiguousarray(out)


def apply_vector(S: SketchOperator, v) -> np.ndarray:
    """Compute S @ v for a length-m vector."""
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    if v.shape[0] != S.m:
        raise ValueError(f"vector length {v.shape[0]} does not match operator m={S.m}")
    return S.to_sparse() @ v
