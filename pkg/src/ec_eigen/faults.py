"""Fail-stop faults modelled as erasures of row/column index sets."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy.linalg as sla

from .coding import CodingMatrix
from .errors import (
    CapacityExceededError,
    ConfigError,
    DuplicateFaultError,
    SingularCodingError,
)

ASSIGN_TOL = 1e-8
MODES = ("none", "single", "multi-random")


@dataclass(frozen=True)
class FaultEvent:
    iteration: int
    rows: tuple[int, ...]

    def __post_init__(self):
        rows = tuple(sorted(int(r) for r in self.rows))
        if not rows:
            raise ConfigError("a fault event must erase at least one row")
        if len(set(rows)) != len(rows):
            raise ConfigError(f"duplicate rows in fault event: {rows}")
        if self.iteration < 1:
            raise ConfigError(f"fault iteration must be >= 1 (got {self.iteration})")
        object.__setattr__(self, "rows", rows)

    @classmethod
    def for_node(cls, iteration, n, num_nodes, node):
        """Erase the contiguous row block owned by simulated node ``node``."""
        return cls(iteration, tuple(node_rows(n, num_nodes, node)))

    def to_dict(self):
        return {"iteration": self.iteration, "rows": list(self.rows)}


def node_rows(n, num_nodes, node) -> range:
    if not 0 <= node < num_nodes:
        raise ConfigError(f"node {node} outside [0, {num_nodes})")
    bounds = np.linspace(0, n, num_nodes + 1).round().astype(int)
    return range(bounds[node], bounds[node + 1])


@dataclass(frozen=True)
class FaultState:
    """Cumulative erasures of one solver run.

    ``order`` lists faulty indices in arrival order and ``columns[i]`` is the
    coding column that replaces index ``order[i]``; ``chol_EF`` is the Cholesky
    factor of ``E_F^T E_F`` where ``E_F = E[order, columns]``.
    """

    capacity: int
    order: tuple[int, ...] = ()
    columns: tuple[int, ...] = ()
    events: tuple[FaultEvent, ...] = ()
    chol_EF: tuple | None = field(default=None, repr=False, compare=False)

    @classmethod
    def empty(cls, capacity: int) -> "FaultState":
        return cls(capacity=capacity)

    @property
    def all_faulty(self) -> tuple[int, ...]:
        return tuple(sorted(self.order))

    @property
    def count(self) -> int:
        return len(self.order)

    @property
    def assignment(self) -> dict[int, int]:
        return dict(zip(self.order, self.columns))

    def E_F(self, E: CodingMatrix) -> np.ndarray:
        return E.rows(self.order)[:, list(self.columns)]


def _extend_columns(EF_rows: np.ndarray, fixed: list[int], need: int) -> list[int]:
    """Greedily append the first unused columns that keep ``EF_rows[:, cols]`` full rank."""
    scale = max(np.linalg.norm(EF_rows, 2), 1.0)
    cols = list(fixed)
    basis = np.linalg.qr(EF_rows[:, cols])[0] if cols else np.zeros((EF_rows.shape[0], 0))
    for c in range(EF_rows.shape[1]):
        if len(cols) == need:
            break
        if c in cols:
            continue
        v = EF_rows[:, c] - basis @ (basis.T @ EF_rows[:, c])
        v -= basis @ (basis.T @ v)
        nv = np.linalg.norm(v)
        if nv > ASSIGN_TOL * scale:
            cols.append(c)
            basis = np.column_stack([basis, v / nv])
    if len(cols) < need:
        raise SingularCodingError(
            f"E restricted to the {EF_rows.shape[0]} faulty rows has rank < {need}; erasure not recoverable"
        )
    return cols


def apply_fault(state: FaultState, event: FaultEvent, E: CodingMatrix) -> FaultState:
    new = [r for r in event.rows]
    if any(r < 0 or r >= E.n for r in new):
        raise IndexError(f"fault rows {event.rows} outside [0, {E.n})")
    overlap = set(new) & set(state.order)
    if overlap:
        raise DuplicateFaultError(f"rows {sorted(overlap)} are already faulty")
    total = state.count + len(new)
    if total > state.capacity:
        raise CapacityExceededError(total, state.capacity)
    order = state.order + tuple(new)
    cols = _extend_columns(E.rows(order), list(state.columns), total)
    EF = E.rows(order)[:, cols]
    try:
        chol = sla.cho_factor(EF.T @ EF, lower=False)
    except np.linalg.LinAlgError as exc:
        raise SingularCodingError(f"Cholesky of E_F^T E_F failed: {exc}") from exc
    return replace(state, order=order, columns=tuple(cols), events=state.events + (event,), chol_EF=chol)


@dataclass(frozen=True)
class FaultSchedule:
    mode: str = "none"
    events: tuple[FaultEvent, ...] = ()
    seed: int | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown fault mode {self.mode!r}; expected one of {MODES}")
        its = [e.iteration for e in self.events]
        if any(b <= a for a, b in zip(its, its[1:])):
            raise ConfigError(f"fault iterations must be strictly increasing: {its}")

    @property
    def total_erasures(self) -> int:
        return sum(len(e.rows) for e in self.events)

    def due(self, iteration: int) -> list[FaultEvent]:
        return [e for e in self.events if e.iteration == iteration]

    def to_dict(self):
        return {"mode": self.mode, "seed": self.seed, "events": [e.to_dict() for e in self.events]}

    @classmethod
    def from_dict(cls, d) -> "FaultSchedule":
        events = tuple(FaultEvent(int(e["iteration"]), tuple(e["rows"])) for e in d.get("events", []))
        mode = d.get("mode", "none" if not events else "single")
        return cls(mode=mode, events=events, seed=d.get("seed"))

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    @classmethod
    def load(cls, path) -> "FaultSchedule":
        return cls.from_dict(json.loads(Path(path).read_text()))


def generate_schedule(mode: str, n: int, k: int, params: dict | None = None, seed: int = 0,
                      enforce_capacity: bool = True) -> FaultSchedule:
    """Build a fault schedule.

    ``single`` accepts explicit ``rows``/``iteration`` and draws whatever is
    missing; ``multi-random`` draws ``count`` events of ``rows_per_event`` rows
    at distinct iterations in ``iteration_range`` (inclusive).  With
    ``enforce_capacity=False`` an over-capacity schedule is returned so the
    solver's own guard trips at the offending iteration.
    """
    params = dict(params or {})
    rng = np.random.default_rng(seed)
    lo, hi = params.get("iteration_range", (1, 50))
    per = int(params.get("rows_per_event", 1))
    if mode == "none":
        return FaultSchedule("none", (), seed)
    if mode == "single":
        rows = params.get("rows")
        if rows is None:
            rows = rng.choice(n, size=per, replace=False).tolist()
        if enforce_capacity and len(rows) > k:
            raise CapacityExceededError(len(rows), k)
        iteration = params.get("iteration")
        if iteration is None:
            iteration = int(rng.integers(lo, hi + 1))
        return FaultSchedule("single", (FaultEvent(int(iteration), tuple(rows)),), seed)
    if mode == "multi-random":
        m = int(params.get("count", 1))
        if enforce_capacity and m * per > k:
            raise CapacityExceededError(m * per, k)
        if m > hi - lo + 1:
            raise ConfigError(f"cannot place {m} events in iterations [{lo}, {hi}]")
        its = np.sort(rng.choice(np.arange(lo, hi + 1), size=m, replace=False))
        rows = rng.choice(n, size=m * per, replace=False).reshape(m, per)
        events = tuple(FaultEvent(int(it), tuple(r.tolist())) for it, r in zip(its, rows))
        return FaultSchedule("multi-random", events, seed)
    raise ConfigError(f"unknown fault mode {mode!r}; expected one of {MODES}")
