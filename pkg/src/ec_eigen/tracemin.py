"""Erasure-coded TraceMin for the smallest eigenpairs of ``(A', B')``."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import CGBreakdownError, ConfigError, ECEigenError, RankDeficientBlockError
from .faults import FaultSchedule
from .recovery import recover_eigenvectors
from .results import EigenResult, IterationRecord, PhaseTimer

log = logging.getLogger(__name__)

DEPENDENT_TOL = 1e-8


@dataclass
class CGParams:
    max_iterations: int = 200
    tol: float = 1e-6


@dataclass
class TraceMinConfig:
    s: int = 4
    tol: float = 1e-8
    max_outer: int = 500
    cg: CGParams = None
    seed: int = 0

    def __post_init__(self):
        if self.cg is None:
            self.cg = CGParams()

    @property
    def block_size(self):
        return 2 * self.s

    def validate(self, n):
        if self.s < 1 or 2 * self.s > n:
            raise ConfigError(f"need 1 <= s and 2*s <= n (s={self.s}, n={n})")
        if self.tol <= 0:
            raise ConfigError("tolerance must be positive")


def cg_solve(op, B, params: CGParams | None = None, X0=None):
    """Column-wise conjugate gradients for ``op(X) = B``.

    ``op`` maps an ``n x m`` block to an ``n x m`` block.  Each column has its
    own step sizes; iteration stops when every column meets the relative
    residual tolerance or ``max_iterations`` is hit.  Returns ``(X, iterations)``.
    """
    params = params or CGParams()
    B = np.asarray(B, dtype=float)
    vec = B.ndim == 1
    if vec:
        B = B[:, None]
    X = np.zeros_like(B) if X0 is None else np.array(X0, dtype=float, copy=True).reshape(B.shape)
    Rk = B - op(X) if X0 is not None else B.copy()
    bnorm = np.linalg.norm(B, axis=0)
    bnorm[bnorm == 0] = 1.0
    P = Rk.copy()
    rr = np.einsum("ij,ij->j", Rk, Rk)
    active = np.sqrt(rr) > params.tol * bnorm
    it = 0
    while active.any() and it < params.max_iterations:
        it += 1
        AP = op(P)
        pAp = np.einsum("ij,ij->j", P, AP)
        if np.any(pAp[active] <= 0):
            raise CGBreakdownError(
                "non-positive curvature in CG: the operator is not positive definite; "
                "shift the matrix (e.g. --shift) so its spectrum is positive"
            )
        alpha = np.where(active, rr / np.where(active, pAp, 1.0), 0.0)
        X += P * alpha
        Rk -= AP * alpha
        rr_new = np.einsum("ij,ij->j", Rk, Rk)
        beta = np.where(active, rr_new / np.where(rr > 0, rr, 1.0), 0.0)
        P = Rk + P * beta
        rr = rr_new
        active = np.sqrt(rr) > params.tol * bnorm
    return (X[:, 0] if vec else X), it


def _chol_gram(Z, BZ):
    G = Z.T @ BZ
    G = 0.5 * (G + G.T)
    try:
        L = np.linalg.cholesky(G)
    except np.linalg.LinAlgError:
        return None, np.arange(Z.shape[1])
    d = np.abs(np.diag(L))
    bad = np.flatnonzero(d <= DEPENDENT_TOL * d.max())
    if bad.size:
        return None, bad
    return L, bad


def b_orthonormalize(Z, sys, rng=None, retry=True):
    """Return ``V`` spanning ``Z`` with ``V^T B' V = I`` (Cholesky on the Gram matrix, applied twice).

    Dependent columns are replaced by random ones and the factorization is
    retried once before ``RankDeficientBlockError`` is raised.
    """
    V = np.array(Z, dtype=float, copy=True)
    for _ in range(2):
        L, bad = _chol_gram(V, sys.apply_B(V))
        if L is None:
            if not retry:
                raise RankDeficientBlockError(f"block is rank deficient in columns {bad.tolist()}")
            rng = rng if rng is not None else np.random.default_rng(0)
            log.warning("rank-deficient block: replacing columns %s with random vectors", bad.tolist())
            V[:, bad] = rng.standard_normal((V.shape[0], bad.size))
            return b_orthonormalize(V, sys, rng, retry=False)
        V = sla.solve_triangular(L, V.T, lower=True).T
    return V


def _correction_solve(sys, X, AX, BX, theta, params):
    """Approximate ``A' Z = B' X`` starting from ``Z0 = X diag(1/theta)``.

    ``Z0`` is exact once the Ritz pairs have converged, so CG only solves for
    the correction ``A' D = B' X - A' Z0``.  Measuring the CG tolerance against
    that right-hand side lets every outer step shrink the error further instead
    of stalling at ``cg.tol`` relative to ``||B' X||``.
    """
    if np.any(theta <= 0):
        return cg_solve(sys.apply_A, BX, params)
    Z0 = X / theta[None, :]
    D, its = cg_solve(sys.apply_A, BX - AX / theta[None, :], params)
    return Z0 + D, its


def tracemin_solve(sys, schedule: FaultSchedule | None, cfg: TraceMinConfig, on_fault: str = "recover", name: str = "tracemin", callback=None) -> EigenResult:
    """TraceMin iteration; ``A'`` must be positive definite for the inner CG.

    ``callback(it, V, sys)`` sees the B'-orthonormal block at the start of
    every outer iteration, after any fault has been handled.
    """
    schedule = schedule or FaultSchedule()
    n = sys.n
    cfg.validate(n)
    s, s2 = cfg.s, cfg.block_size
    rng = np.random.default_rng(cfg.seed)
    norm_A = sys.norm_A or 1.0
    V = b_orthonormalize(rng.standard_normal((n, s2)), sys, rng)
    history, fault_log = [], []
    theta = np.zeros(s2)
    X = V
    converged = False
    try:
        for it in range(1, cfg.max_outer + 1):
            t0 = time.perf_counter()
            timer = PhaseTimer()
            events = schedule.due(it)
            for ev in events:
                with timer("fault"):
                    if on_fault == "restart":
                        V = rng.standard_normal((n, s2))
                    else:
                        sys = sys.with_fault(ev)
                        V = V.copy()
                        V[list(ev.rows)] = rng.standard_normal((len(ev.rows), s2)) * np.sqrt(np.mean(V**2))
                    V = b_orthonormalize(V, sys, rng)
                fault_log.append({"iteration": it, "rows": list(ev.rows), "action": on_fault})
                log.info("iteration %d: erased rows %s (%s)", it, list(ev.rows), on_fault)
            if callback is not None:
                callback(it, V, sys)
            with timer("matvec"):
                W = sys.apply_A(V)
                BV = sys.apply_B(V)
            with timer("projection"):
                H = V.T @ W
                theta, Y = np.linalg.eigh(0.5 * (H + H.T))
                X = V @ Y
                AX, BX = W @ Y, BV @ Y
                res = np.linalg.norm(AX - BX * theta[None, :], axis=0) / norm_A
            r_rel = float(res[:s].max())
            rec = IterationRecord(
                iter=it, r_rel=r_rel, wall_time=0.0, phase_times={}, trace=float(theta.sum()),
                fault=[list(e.rows) for e in events] or None, eigenvalues=[float(x) for x in theta[:s]],
            )
            if r_rel < cfg.tol:
                converged = True
            else:
                with timer("cg"):
                    Z, rec.cg_iterations = _correction_solve(sys, X, AX, BX, theta, cfg.cg)
                with timer("orth"):
                    V = b_orthonormalize(Z, sys, rng)
            rec.wall_time = time.perf_counter() - t0
            rec.phase_times = dict(timer.times)
            history.append(rec)
            if converged:
                break
    except ECEigenError as exc:
        exc.result = _result(name, sys, theta[:s], X[:, :s], False, history, fault_log, exc)
        raise
    return _result(name, sys, theta[:s], X[:, :s], converged, history, fault_log)


def _result(name, sys, lam, X, converged, history, fault_log, exc=None):
    recovered = recover_eigenvectors(X, sys.E, sys.fault, lam) if sys.E is not None else None
    status = type(exc).__name__ if exc is not None else ("ok" if converged else "no-convergence")
    return EigenResult(
        solver=name, eigenvalues=np.asarray(lam), vectors=X, recovered=recovered,
        iterations=len(history), converged=converged, history=history, fault_log=fault_log,
        status=status, error=str(exc) if exc is not None else None, fault_state=sys.fault,
    )
