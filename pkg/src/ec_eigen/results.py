"""Per-iteration records and solver results."""

from __future__ import annotations

import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field

import numpy as np

from .recovery import RecoveredEigenpairs

PHASES = ("matvec", "bsolve", "qr", "projection", "cg", "orth", "fault")


class PhaseTimer:
    """Accumulate wall time per named phase within one iteration."""

    def __init__(self):
        self.times = dict.fromkeys(PHASES, 0.0)

    @contextmanager
    def __call__(self, phase):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.times[phase] = self.times.get(phase, 0.0) + time.perf_counter() - t0


@dataclass
class IterationRecord:
    iter: int
    r_rel: float
    wall_time: float
    phase_times: dict
    fault: list | None = None
    cg_iterations: int | None = None
    trace: float | None = None
    eigenvalues: list | None = None

    def to_dict(self):
        return asdict(self)


@dataclass
class EigenResult:
    solver: str
    eigenvalues: np.ndarray
    vectors: np.ndarray  # reconstituted coordinates
    recovered: RecoveredEigenpairs | None
    iterations: int
    converged: bool
    history: list[IterationRecord] = field(default_factory=list)
    fault_log: list[dict] = field(default_factory=list)
    status: str = "ok"
    error: str | None = None
    config: dict = field(default_factory=dict)
    fault_state: object = None

    @property
    def residual_history(self) -> np.ndarray:
        return np.array([h.r_rel for h in self.history])

    def timing(self) -> dict:
        """Total and median wall time per phase over the run."""
        out = {}
        for ph in PHASES:
            vals = [h.phase_times.get(ph, 0.0) for h in self.history]
            out[ph] = {"total": float(np.sum(vals)) if vals else 0.0, "median": float(np.median(vals)) if vals else 0.0}
        walls = [h.wall_time for h in self.history]
        out["iteration"] = {"total": float(np.sum(walls)) if walls else 0.0, "median": float(np.median(walls)) if walls else 0.0}
        return out

    def to_dict(self):
        return {
            "solver": self.solver,
            "status": self.status,
            "error": self.error,
            "converged": self.converged,
            "iterations": self.iterations,
            "eigenvalues": [float(x) for x in self.eigenvalues],
            "fault_log": self.fault_log,
            "timing": self.timing(),
            "recovery": self.recovered.to_dict() if self.recovered is not None else None,
            "config": self.config,
        }
