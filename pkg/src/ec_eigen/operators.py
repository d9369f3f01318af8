"""Reconstituted operators ``A'`` and ``B'`` applied without forming them.

After erasures the faulty rows/columns of ``A`` (and of ``B = I``) are replaced
in place by coding columns of ``R`` (of ``E``), and the faulty-faulty block by
the matching block of ``S`` (of ``T``).  Everything stays in the original row
order; faulty positions carry the redundancy coordinates ``r``.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg  # noqa: F401  (sp.linalg.norm)

from .coding import CodingMatrix
from .errors import DimensionMismatchError, NoFaultsError, SingularCodingError
from .faults import FaultEvent, FaultState, apply_fault
from .redundancy import RedundancyBlocks, as_dense, compute_redundancy


def _as_block(X, n):
    X = np.asarray(X, dtype=float)
    vector = X.ndim == 1
    if vector:
        X = X[:, None]
    if X.ndim != 2 or X.shape[0] != n:
        raise DimensionMismatchError(f"expected {n} rows, got shape {X.shape}")
    return X, vector


class FaultAwareSystem:
    """``(A', B')`` for the current fault state, applied implicitly.

    The stored ``A`` is never modified; reads at faulty indices are masked,
    so the same ``A`` can still serve a no-fault baseline.
    """

    def __init__(self, A, E: CodingMatrix, blocks: RedundancyBlocks | None = None, fault: FaultState | None = None):
        self.A = A
        self.E = E
        self.blocks = compute_redundancy(A, E) if blocks is None else blocks
        self.fault = FaultState.empty(E.k) if fault is None else fault
        self.n = E.n
        self.norm_A = float(sp.linalg.norm(A) if sp.issparse(A) else np.linalg.norm(A))
        self._prepare()

    def _prepare(self):
        f = self.fault
        self.F = np.asarray(f.order, dtype=int)
        cols = list(f.columns)
        R = self.blocks.R
        self.R_a = R[:, cols].tocsc() if sp.issparse(R) else R[:, cols]
        self.E_a = self.E.entries[:, cols].tocsc()
        self.S_a = self.blocks.S[np.ix_(cols, cols)]
        self.T_a = self.blocks.T[np.ix_(cols, cols)]
        self.R_FF = as_dense(self.R_a[self.F, :]) if self.F.size else np.zeros((0, 0))
        self.E_FF = as_dense(self.E_a[self.F, :]) if self.F.size else np.zeros((0, 0))
        self.mask = np.ones(self.n, dtype=bool)
        self.mask[self.F] = False
        self.lu_EF = sla.lu_factor(self.E_FF) if self.F.size else None

    def with_fault(self, event: FaultEvent) -> "FaultAwareSystem":
        """New system after ``event``; raises ``CapacityExceededError`` past ``k`` rows."""
        return type(self)(self.A, self.E, self.blocks, apply_fault(self.fault, event, self.E))

    @property
    def has_faults(self):
        return self.F.size > 0

    def apply_A(self, X):
        X, vec = _as_block(X, self.n)
        if not self.has_faults:
            Y = np.asarray(self.A @ X)
            return Y[:, 0] if vec else Y
        F = self.F
        Xz = X * self.mask[:, None]
        Y = np.asarray(self.A @ Xz) * self.mask[:, None]
        XF = X[F]
        Y += self.R_a @ XF
        Y[F] += self.R_a.T @ X
        Y[F] += (self.S_a - self.R_FF - self.R_FF.T) @ XF
        return Y[:, 0] if vec else Y

    def apply_B(self, X):
        X, vec = _as_block(X, self.n)
        if not self.has_faults:
            Y = X.copy()
            return Y[:, 0] if vec else Y
        F = self.F
        Y = X * self.mask[:, None]
        XF = X[F]
        Y += self.E_a @ XF
        Y[F] += self.E_a.T @ X
        Y[F] += (self.T_a - self.E_FF - self.E_FF.T) @ XF
        return Y[:, 0] if vec else Y

    def solve_B(self, Y):
        """Solve ``B' Z = Y`` through the Schur complement ``E_F^T E_F``.

        ``B' = [[I, E_C], [E_C^T, T]]`` with ``T - E_C^T E_C = E_F^T E_F``, so
        ``Z_F = (E_F^T E_F)^{-1} (Y_F - E_C^T Y_C)`` and ``Z_C = Y_C - E_C Z_F``.
        The complement is applied as two solves with the square ``E_F`` rather
        than its Gram matrix, which would square the condition number.
        """
        Y, vec = _as_block(Y, self.n)
        if not self.has_faults:
            Z = Y.copy()
            return Z[:, 0] if vec else Z
        if self.lu_EF is None:
            raise SingularCodingError("no factorization of E_F is available")
        F = self.F
        Yc = Y * self.mask[:, None]
        W = sla.lu_solve(self.lu_EF, Y[F] - self.E_a.T @ Yc, trans=1)
        ZF = sla.lu_solve(self.lu_EF, W)
        Z = Yc - (self.E_a @ ZF) * self.mask[:, None]
        Z[F] = ZF
        return Z[:, 0] if vec else Z


def reconstitute_explicit(A, E: CodingMatrix, blocks: RedundancyBlocks, fault: FaultState):
    """Dense ``(A', B')``: faulty row/column ``order[i]`` takes coding column ``columns[i]``."""
    if fault.count == 0:
        raise NoFaultsError("reconstitution needs at least one faulty index")
    A = as_dense(A)
    n = A.shape[0]
    F = np.asarray(fault.order, dtype=int)
    cols = list(fault.columns)
    R = blocks.R_dense()[:, cols]
    Ed = E.toarray()[:, cols]
    C = np.ones(n, dtype=bool)
    C[F] = False

    def fill(base, code, corner):
        M = base.copy()
        M[F, :] = 0.0
        M[:, F] = 0.0
        M[:, F] = code * C[:, None]
        M[F, :] = M[:, F].T
        M[np.ix_(F, F)] = corner
        return M

    A_prime = fill(A, R, blocks.S[np.ix_(cols, cols)])
    B_prime = fill(np.eye(n), Ed, blocks.T[np.ix_(cols, cols)])
    return A_prime, B_prime


class ExplicitSystem(FaultAwareSystem):
    """Same interface, but materializes ``A'``/``B'`` densely on every fault."""

    def _prepare(self):
        super()._prepare()
        if self.has_faults:
            self.A_prime, self.B_prime = reconstitute_explicit(self.A, self.E, self.blocks, self.fault)
        else:
            self.A_prime, self.B_prime = as_dense(self.A), np.eye(self.n)

    def apply_A(self, X):
        X, vec = _as_block(X, self.n)
        Y = self.A_prime @ X
        return Y[:, 0] if vec else Y

    def apply_B(self, X):
        X, vec = _as_block(X, self.n)
        Y = self.B_prime @ X
        return Y[:, 0] if vec else Y

    def solve_B(self, Y):
        Y, vec = _as_block(Y, self.n)
        Z = np.linalg.solve(self.B_prime, Y)
        return Z[:, 0] if vec else Z


def apply_A(sys: FaultAwareSystem, X):
    return sys.apply_A(X)


def apply_B(sys: FaultAwareSystem, X):
    return sys.apply_B(X)


def solve_B(sys: FaultAwareSystem, Y):
    return sys.solve_B(Y)


class PlainSystem:
    """``(A, I)`` with no coding; faults cannot be absorbed."""

    E = None

    def __init__(self, A):
        self.A = A
        self.n = A.shape[0]
        self.fault = FaultState.empty(0)
        self.norm_A = float(sp.linalg.norm(A) if sp.issparse(A) else np.linalg.norm(A))

    def with_fault(self, event):
        raise NoFaultsError("a system without coding cannot absorb faults")

    def apply_A(self, X):
        return np.asarray(self.A @ np.asarray(X, dtype=float))

    def apply_B(self, X):
        return np.array(X, dtype=float, copy=True)

    def solve_B(self, Y):
        return np.array(Y, dtype=float, copy=True)
