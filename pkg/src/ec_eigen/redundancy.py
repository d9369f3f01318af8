"""Redundancy blocks ``R = A E``, ``S = E^T A E``, ``T = E^T E`` and the augmented pencil.

The augmented pencil is a diagnostic: it is ``(n+k) x (n+k)`` and singular, so the
solvers never build it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sp

from .coding import CodingMatrix
from .errors import AsymmetricInputError, DimensionMismatchError

SYM_TOL = 1e-12


def as_dense(M) -> np.ndarray:
    return M.toarray() if sp.issparse(M) else np.asarray(M, dtype=float)


def symmetry_defect(A) -> float:
    """``max|A - A^T| / max|A|`` (0 for the zero matrix)."""
    if sp.issparse(A):
        diff = abs(A - A.T).max()
        scale = abs(A).max()
    else:
        A = np.asarray(A)
        diff = np.abs(A - A.T).max() if A.size else 0.0
        scale = np.abs(A).max() if A.size else 0.0
    return float(diff / scale) if scale > 0 else 0.0


def check_symmetric(A, tol=SYM_TOL):
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatchError(f"expected a square matrix, got shape {A.shape}")
    defect = symmetry_defect(A)
    if defect > tol:
        raise AsymmetricInputError(f"matrix is not symmetric: relative defect {defect:.3e} > {tol:.1e}")


def _sym(X):
    return 0.5 * (X + X.T)


@dataclass(frozen=True, eq=False)
class RedundancyBlocks:
    R: np.ndarray | sp.csr_matrix  # n x k, dense iff A is dense
    S: np.ndarray  # k x k
    T: np.ndarray  # k x k

    @property
    def k(self):
        return self.S.shape[0]

    def R_dense(self) -> np.ndarray:
        return as_dense(self.R)


def compute_redundancy(A, E: CodingMatrix) -> RedundancyBlocks:
    check_symmetric(A)
    if A.shape[0] != E.n:
        raise DimensionMismatchError(f"A is {A.shape}, E has {E.n} rows")
    Es = E.entries
    if sp.issparse(A):
        R = sp.csr_matrix(A @ Es)
        S = as_dense(Es.T @ R)
    else:
        R = np.asarray(A @ Es, dtype=float)
        S = np.asarray(Es.T @ R, dtype=float)
    T = (Es.T @ Es).toarray()
    return RedundancyBlocks(R=R, S=_sym(S), T=_sym(T))


@dataclass(frozen=True, eq=False)
class AugmentedPencil:
    A_tilde: np.ndarray
    B_tilde: np.ndarray

    @property
    def n(self):
        return self.A_tilde.shape[0]


def assemble_augmented_pencil(A, E: CodingMatrix, blocks: RedundancyBlocks) -> AugmentedPencil:
    A = as_dense(A)
    Ed = E.toarray()
    n, k = Ed.shape
    if A.shape != (n, n) or blocks.R.shape != (n, k) or blocks.S.shape != (k, k):
        raise DimensionMismatchError("A, E and the redundancy blocks do not conform")
    R = blocks.R_dense()
    A_tilde = np.block([[A, R], [R.T, blocks.S]])
    B_tilde = np.block([[np.eye(n), Ed], [Ed.T, blocks.T]])
    return AugmentedPencil(A_tilde=A_tilde, B_tilde=B_tilde)


def joint_null_basis(E: CodingMatrix) -> np.ndarray:
    return np.vstack([E.toarray(), -np.eye(E.k)])


def verify_joint_nullspace(pencil: AugmentedPencil, E: CodingMatrix) -> float:
    """Relative size of ``A~ N`` and ``B~ N`` for ``N = [E; -I]``; zero in exact arithmetic."""
    N = joint_null_basis(E)
    res = max(np.linalg.norm(pencil.A_tilde @ N), np.linalg.norm(pencil.B_tilde @ N))
    return float(res / max(np.linalg.norm(pencil.A_tilde), 1.0))


def equivalence_transform(pencil: AugmentedPencil, E: CodingMatrix):
    """Return ``M^{-1} A~ M`` and ``M^{-1} B~ M`` with ``M = [[E, I], [-I, E^T]]``.

    The first ``k`` columns of ``M`` span the joint null space, the last ``n``
    are orthogonal to them, so both results are block diagonal with a zero
    leading ``k x k`` block.
    """
    Ed = E.toarray()
    n, k = Ed.shape
    M = np.block([[Ed, np.eye(n)], [-np.eye(k), Ed.T]])
    At = np.linalg.solve(M, pencil.A_tilde @ M)
    Bt = np.linalg.solve(M, pencil.B_tilde @ M)
    return At, Bt


def verify_pencil_equivalence(pencil: AugmentedPencil, A, E: CodingMatrix) -> float:
    """Distance of ``M^{-1}(A~ - lam B~)M`` from ``diag(0, (A - lam I)(I + E E^T))`` at lam = 0, 1."""
    A = as_dense(A)
    Ed = E.toarray()
    n, k = Ed.shape
    At, Bt = equivalence_transform(pencil, E)
    G = np.eye(n) + Ed @ Ed.T
    scale = max(np.linalg.norm(pencil.A_tilde), 1.0)
    worst = 0.0
    for lam in (0.0, 1.0):
        target = np.zeros((n + k, n + k))
        target[k:, k:] = A @ G - lam * G
        worst = max(worst, np.linalg.norm(At - lam * Bt - target) / scale)
    return float(worst)


def save_blocks(directory, E: CodingMatrix, blocks: RedundancyBlocks, meta: dict | None = None):
    """Persist ``E`` (Matrix Market + JSON sidecar) and ``R``, ``S``, ``T`` into ``directory``."""
    from .coding import save_coding_matrix

    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    save_coding_matrix(E, d / "E")
    scipy.io.mmwrite(str(d / "R.mtx"), blocks.R, precision=17)
    scipy.io.mmwrite(str(d / "S.mtx"), blocks.S, precision=17)
    scipy.io.mmwrite(str(d / "T.mtx"), blocks.T, precision=17)
    (d / "blocks.json").write_text(json.dumps({"n": E.n, "k": E.k, "p": E.p, "seed": E.seed, **(meta or {})}, indent=2))


def load_blocks(directory):
    from .coding import load_coding_matrix

    d = Path(directory)
    E = load_coding_matrix(d / "E")
    R = scipy.io.mmread(str(d / "R.mtx"))
    R = sp.csr_matrix(R) if sp.issparse(R) else np.asarray(R, dtype=float)
    S = np.asarray(scipy.io.mmread(str(d / "S.mtx")), dtype=float)
    T = np.asarray(scipy.io.mmread(str(d / "T.mtx")), dtype=float)
    meta = json.loads((d / "blocks.json").read_text())
    return E, RedundancyBlocks(R=R, S=_sym(S), T=_sym(T)), meta
