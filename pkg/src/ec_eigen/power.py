"""Erasure-coded generalized block power method with QR subspace iteration."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import ConfigError, ECEigenError
from .faults import FaultSchedule
from .recovery import recover_eigenvectors
from .results import EigenResult, IterationRecord, PhaseTimer

log = logging.getLogger(__name__)


@dataclass
class PowerConfig:
    m: int = 4
    tol: float = 1e-8
    max_iterations: int = 1000
    seed: int = 0

    def validate(self, n):
        if not 1 <= self.m <= n:
            raise ConfigError(f"block width m={self.m} must lie in [1, {n}]")
        if self.tol <= 0:
            raise ConfigError("tolerance must be positive")


def projected_eig(AQ, BQ, descending=True):
    """Eigenpairs of the small pencil ``(AQ, BQ)``, ``U^T BQ U = I``.

    Descending order sorts by magnitude (power method), ascending by value.
    Ties keep index order.  Each column of ``U`` is signed so its largest
    entry is positive, which keeps iterates reproducible across operator
    variants that differ only in rounding.
    """
    AQ = 0.5 * (AQ + AQ.T)
    BQ = 0.5 * (BQ + BQ.T)
    try:
        lam, U = sla.eigh(AQ, BQ)
    except np.linalg.LinAlgError:
        lam, U = sla.eig(AQ, BQ)
        lam, U = lam.real, U.real
        U /= np.sqrt(np.abs(np.einsum("ij,ij->j", U, BQ @ U)))[None, :]
    key = -np.abs(lam) if descending else lam
    idx = np.argsort(key, kind="stable")
    U = U[:, idx]
    pivot = U[np.argmax(np.abs(U), axis=0), np.arange(U.shape[1])]
    return lam[idx], U * np.where(pivot < 0, -1.0, 1.0)[None, :]


def _thin_qr(X):
    return np.linalg.qr(X)[0]


def power_solve(sys, schedule: FaultSchedule | None, cfg: PowerConfig, on_fault: str = "recover", name: str = "power") -> EigenResult:
    """Block power iteration on ``(A', B')`` with faults injected at iteration starts.

    ``on_fault="restart"`` ignores the coding and restarts from a fresh random
    block instead (the no-coding baseline).  Solver errors are re-raised with
    the partial result attached as ``exc.result``.
    """
    schedule = schedule or FaultSchedule()
    n = sys.n
    cfg.validate(n)
    rng = np.random.default_rng(cfg.seed)
    X = _thin_qr(rng.standard_normal((n, cfg.m)))
    norm_A = sys.norm_A or 1.0
    history, fault_log = [], []
    lam = np.zeros(cfg.m)
    X_new = X
    converged = False
    it = 0
    try:
        for it in range(1, cfg.max_iterations + 1):
            t0 = time.perf_counter()
            timer = PhaseTimer()
            events = schedule.due(it)
            for ev in events:
                with timer("fault"):
                    if on_fault == "restart":
                        X = _thin_qr(rng.standard_normal((n, cfg.m)))
                    else:
                        sys = sys.with_fault(ev)
                        X = X.copy()
                        X[list(ev.rows)] = rng.standard_normal((len(ev.rows), cfg.m))
                        X = _thin_qr(X)
                fault_log.append({"iteration": it, "rows": list(ev.rows), "action": on_fault})
                log.info("iteration %d: erased rows %s (%s)", it, list(ev.rows), on_fault)
            with timer("matvec"):
                Y = sys.apply_A(X)
            with timer("bsolve"):
                Z = sys.solve_B(Y)
            with timer("qr"):
                Q = _thin_qr(Z)
            with timer("matvec"):
                AQ = sys.apply_A(Q)
                BQ = sys.apply_B(Q)
            with timer("projection"):
                lam, U = projected_eig(Q.T @ AQ, Q.T @ BQ, descending=True)
                X_new = Q @ U
                r = np.linalg.norm(AQ @ U - (BQ @ U) * lam[None, :])
                r_rel = r / norm_A
            history.append(IterationRecord(
                iter=it, r_rel=float(r_rel), wall_time=time.perf_counter() - t0,
                phase_times=dict(timer.times), fault=[list(e.rows) for e in events] or None,
                eigenvalues=[float(x) for x in lam],
            ))
            if r_rel < cfg.tol:
                converged = True
                break
            X = X_new
    except ECEigenError as exc:
        exc.result = _result(name, sys, lam, X_new, False, history, fault_log, exc)
        raise
    return _result(name, sys, lam, X_new, converged, history, fault_log)


def _result(name, sys, lam, X, converged, history, fault_log, exc=None):
    recovered = recover_eigenvectors(X, sys.E, sys.fault, lam) if sys.E is not None else None
    status = "ok" if converged else "no-convergence"
    if exc is not None:
        status = type(exc).__name__
    return EigenResult(
        solver=name, eigenvalues=np.asarray(lam), vectors=X, recovered=recovered,
        iterations=len(history), converged=converged,
        history=history, fault_log=fault_log, status=status,
        error=str(exc) if exc is not None else None, fault_state=sys.fault,
    )
