"""Map reconstituted-coordinate solutions back to eigenvectors of the original ``A``."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.io

from .coding import CodingMatrix
from .errors import InconsistentFaultStateError
from .faults import FaultState
from .redundancy import as_dense

SPURIOUS_TOL = 1e-8


@dataclass
class RecoveredEigenpairs:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # n x s, original coordinates, unit columns
    recovery_map: dict[int, int] = field(default_factory=dict)

    def residuals(self, A) -> np.ndarray:
        """``||A v - lam v||_2`` per pair, against the original (unerased) ``A``."""
        V = self.eigenvectors
        return np.linalg.norm(np.asarray(A @ V) - V * self.eigenvalues[None, :], axis=0)

    def to_dict(self, A=None):
        d = {
            "eigenvalues": [float(x) for x in self.eigenvalues],
            "fault_map": {str(i): int(c) for i, c in self.recovery_map.items()},
        }
        if A is not None:
            d["residuals"] = [float(x) for x in self.residuals(A)]
        return d

    def save(self, path, A=None, vectors_path=None):
        Path(path).write_text(json.dumps(self.to_dict(A), indent=2))
        if vectors_path is not None:
            scipy.io.mmwrite(str(vectors_path), self.eigenvectors, precision=17)


def normalize_columns(V: np.ndarray) -> np.ndarray:
    """Unit 2-norm columns with the first nonzero entry made positive."""
    V = np.array(V, dtype=float, copy=True)
    norms = np.linalg.norm(V, axis=0)
    norms[norms == 0] = 1.0
    V /= norms
    for j in range(V.shape[1]):
        nz = np.flatnonzero(np.abs(V[:, j]) > 1e-14)
        if nz.size and V[nz[0], j] < 0:
            V[:, j] = -V[:, j]
    return V


def recovery_matrix(E: CodingMatrix, fault: FaultState) -> np.ndarray:
    """Dense ``M`` with ``v = M y``: identity on intact indices, coding columns at faulty ones."""
    M = np.eye(E.n)
    F = list(fault.order)
    M[:, F] = E.toarray()[:, list(fault.columns)]
    return M


def recover_eigenvectors(Y, E: CodingMatrix, fault: FaultState, eigenvalues=None) -> RecoveredEigenpairs:
    """Apply ``v_c = c + E_C r``, ``v_f = E_F r`` to every column of ``Y``.

    ``r`` is read from the faulty positions of ``Y`` (``r[j] = Y[order[j]]``).
    """
    Y = np.atleast_2d(np.asarray(Y, dtype=float).T).T
    if len(fault.order) != len(fault.columns):
        raise InconsistentFaultStateError(
            f"{len(fault.order)} faulty indices but {len(fault.columns)} assigned coding columns"
        )
    if Y.shape[0] != E.n:
        raise InconsistentFaultStateError(f"Y has {Y.shape[0]} rows, E has {E.n}")
    F = np.asarray(fault.order, dtype=int)
    V = Y.copy()
    if F.size:
        r = Y[F]
        V[F] = 0.0
        V += as_dense(E.entries[:, list(fault.columns)] @ r)
    lam = np.full(Y.shape[1], np.nan) if eigenvalues is None else np.asarray(eigenvalues, dtype=float)
    return RecoveredEigenpairs(lam, normalize_columns(V), fault.assignment)


def detect_spurious(x, r, E: CodingMatrix, tol: float = SPURIOUS_TOL) -> bool:
    """True when ``x + E r`` vanishes, i.e. the pair lies in the pencil's joint null space."""
    x = np.asarray(x, dtype=float)
    r = np.asarray(r, dtype=float)
    Ed = E.toarray()
    lhs = np.linalg.norm(x + Ed @ r)
    return bool(lhs <= tol * (np.linalg.norm(x) + np.linalg.norm(Ed) * np.linalg.norm(r)))


def classify_pencil_eigenvectors(X_tilde, E: CodingMatrix, tol: float = SPURIOUS_TOL) -> np.ndarray:
    """Boolean mask over columns of ``[x; r]`` eigenvectors of the augmented pencil."""
    X_tilde = np.real_if_close(np.asarray(X_tilde))
    n = E.n
    return np.array([detect_spurious(X_tilde[:n, j].real, X_tilde[n:, j].real, E, tol) for j in range(X_tilde.shape[1])])
