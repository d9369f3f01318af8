"""Sparse erasure-coding matrices with a staggered nonzero pattern.

Rows are split into contiguous bands of height ``ceil(n / k)``.  Band ``j``
stores its ``p`` nonzeros in columns ``j, j+1, ..., j+p-1`` (mod ``k``), so the
window walks one column per band and wraps around, covering every column.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sp

from .errors import InvalidDimensionsError

VALUE_LOW = 0.1
VALUE_HIGH = 1.0
RANK_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class CodingMatrix:
    """An ``n x k`` coding matrix ``E``; ``k`` is the fault capacity."""

    n: int
    k: int
    p: int
    seed: int | None
    entries: sp.csr_matrix

    def __post_init__(self):
        if self.entries.shape != (self.n, self.k):
            raise InvalidDimensionsError(
                f"entries have shape {self.entries.shape}, expected {(self.n, self.k)}"
            )

    @property
    def shape(self):
        return (self.n, self.k)

    @property
    def nnz(self):
        return self.entries.nnz

    def toarray(self) -> np.ndarray:
        return self.entries.toarray()

    def rows(self, idx) -> np.ndarray:
        """Dense copy of ``E[idx, :]``."""
        return self.entries[np.asarray(idx, dtype=int), :].toarray()

    @classmethod
    def from_dense(cls, array, seed=None) -> "CodingMatrix":
        """Wrap an explicit (typically dense) matrix, e.g. a hand-written example."""
        array = np.atleast_2d(np.asarray(array, dtype=float))
        n, k = array.shape
        p = int(np.count_nonzero(array, axis=1).max()) if array.size else 0
        return cls(n=n, k=k, p=p, seed=seed, entries=sp.csr_matrix(array))


def _check_dims(n, k, p):
    if n < 1 or k < 1 or p < 1:
        raise InvalidDimensionsError(f"n, k, p must be positive (got n={n}, k={k}, p={p})")
    if k > n:
        raise InvalidDimensionsError(f"k={k} exceeds n={n}")
    if p > k:
        raise InvalidDimensionsError(f"p={p} exceeds k={k}")


def stagger_columns(n: int, k: int, p: int) -> np.ndarray:
    """Column indices of the nonzeros, one row of ``p`` columns per matrix row."""
    band = np.arange(n) // math.ceil(n / k)
    return (band[:, None] + np.arange(p)[None, :]) % k


def build_staggered_coding_matrix(n: int, k: int, p: int, seed: int = 0) -> CodingMatrix:
    _check_dims(n, k, p)
    rng = np.random.default_rng(seed)
    cols = stagger_columns(n, k, p)
    vals = rng.uniform(VALUE_LOW, VALUE_HIGH, size=(n, p))
    rows = np.repeat(np.arange(n), p)
    E = sp.csr_matrix((vals.ravel(), (rows, cols.ravel())), shape=(n, k))
    E.sort_indices()
    return CodingMatrix(n=n, k=k, p=p, seed=seed, entries=E)


def default_p(k: int) -> int:
    """Nonzeros per row: one more than ``ceil(ln k / ln ln k)``, capped at ``k``."""
    if k < 1:
        raise InvalidDimensionsError(f"k must be positive (got {k})")
    if k < 3:
        return min(k, 2)
    return min(k, math.ceil(math.log(k) / math.log(math.log(k))) + 1)


def check_submatrix_rank(E: CodingMatrix, rows) -> bool:
    """True iff ``E[rows, :]`` has full row rank (numerical threshold ``RANK_TOL``)."""
    rows = np.asarray(list(rows), dtype=int)
    if rows.size == 0:
        return True
    if rows.min() < 0 or rows.max() >= E.n:
        raise IndexError(f"row index out of range [0, {E.n})")
    if np.unique(rows).size != rows.size:
        raise ValueError("row indices must be distinct")
    if rows.size > E.k:
        return False
    sv = np.linalg.svd(E.rows(rows), compute_uv=False)
    if sv[0] == 0.0:
        return False
    return bool(np.count_nonzero(sv > RANK_TOL * sv[0]) == rows.size)


def sampled_rank_failure_rate(E: CodingMatrix, size: int | None = None, trials: int = 1000, seed: int = 0):
    """Fraction of uniformly sampled ``size``-row subsets that are rank deficient."""
    size = E.k if size is None else size
    rng = np.random.default_rng(seed)
    failures = 0
    for _ in range(trials):
        rows = rng.choice(E.n, size=size, replace=False)
        failures += not check_submatrix_rank(E, rows)
    return failures / trials


def rank_failure_bound(p: int) -> float:
    """Upper bound ``(e / (p + 1)) ** (p + 1)`` on the dependent-subset probability."""
    return (math.e / (p + 1)) ** (p + 1)


def save_coding_matrix(E: CodingMatrix, path) -> Path:
    """Write ``<path>.mtx`` (coordinate format) and the ``<path>.json`` sidecar."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mtx = path.with_suffix(".mtx")
    scipy.io.mmwrite(str(mtx), E.entries, field="real", symmetry="general", precision=17)
    meta = {"n": E.n, "k": E.k, "p": E.p, "seed": E.seed}
    path.with_suffix(".json").write_text(json.dumps(meta, indent=2))
    return mtx


def load_coding_matrix(path) -> CodingMatrix:
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    entries = sp.csr_matrix(scipy.io.mmread(str(path.with_suffix(".mtx"))))
    entries.sort_indices()
    return CodingMatrix(n=meta["n"], k=meta["k"], p=meta["p"], seed=meta["seed"], entries=entries)
