"""Experiment configuration read from JSON."""

from __future__ import annotations

import copy
import itertools
import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

from ..errors import ConfigError

SOLVERS = ("power-explicit", "power-implicit", "tracemin")
BASELINES = ("none", "restart-on-fault")
SEED_ENV = "EC_EIGEN_SEED"


@dataclass
class ExperimentConfig:
    matrix: dict | str
    solver: str = "tracemin"
    s: int = 4  # wanted pairs (tracemin) / block width m (power)
    tol: float = 1e-8
    max_iterations: int = 500
    cg: dict = field(default_factory=lambda: {"max_iterations": 200, "tol": 1e-6})
    coding: dict | None = None  # {"k", "p", "seed"} or {"blocks": dir}
    schedule: dict = field(default_factory=lambda: {"mode": "none"})
    baseline: str = "none"
    seed: int = 0
    shift: float | str | None = None  # None, "auto" or a number
    explicit_check: bool = False
    save_vectors: bool = False
    output: str = "ec_eigen_out"

    def __post_init__(self):
        if self.solver not in SOLVERS:
            raise ConfigError(f"unknown solver {self.solver!r}; expected one of {SOLVERS}")
        if self.baseline not in BASELINES:
            raise ConfigError(f"unknown baseline {self.baseline!r}; expected one of {BASELINES}")
        if self.s < 1:
            raise ConfigError("s (or m) must be positive")
        if self.tol <= 0:
            raise ConfigError("tolerance must be positive")
        if isinstance(self.matrix, dict) and self.matrix.get("kind") in ("file", "covariance-from-csv"):
            if not Path(self.matrix["path"]).exists():
                raise ConfigError(f"referenced file does not exist: {self.matrix['path']}")
        if isinstance(self.matrix, str) and not Path(self.matrix).exists():
            raise ConfigError(f"referenced file does not exist: {self.matrix}")
        has_faults = self.schedule.get("mode", "none") != "none" or self.schedule.get("events")
        if has_faults and not self.coding and self.baseline == "none":
            raise ConfigError("a fault schedule needs a coding section (or the restart baseline)")

    def with_seed_override(self) -> "ExperimentConfig":
        """Apply ``EC_EIGEN_SEED`` to the solver, coding and schedule seeds."""
        raw = os.environ.get(SEED_ENV)
        if raw is None:
            return self
        try:
            seed = int(raw)
        except ValueError as exc:
            raise ConfigError(f"{SEED_ENV} must be an integer, got {raw!r}") from exc
        cfg = copy.deepcopy(self)
        cfg.seed = seed
        if cfg.coding and "blocks" not in cfg.coding:
            cfg.coding["seed"] = seed
        cfg.schedule["seed"] = seed
        return cfg

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        d = dict(d)
        if "m" in d and "s" not in d:
            d["s"] = d.pop("m")
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        if "matrix" not in d:
            raise ConfigError("config needs a 'matrix' entry")
        return cls(**d)


def _set_dotted(d, key, value):
    parts = key.split(".")
    for p in parts[:-1]:
        d = d.setdefault(p, {})
    d[parts[-1]] = value


def expand_grid(raw: dict) -> list[dict]:
    """Cartesian product over ``raw["grid"]`` (dotted keys -> value lists); one output dir per cell."""
    grid = raw.get("grid")
    base = {k: v for k, v in raw.items() if k != "grid"}
    if not grid:
        return [base]
    keys = list(grid)
    cells = []
    for i, values in enumerate(itertools.product(*(grid[k] for k in keys))):
        cell = copy.deepcopy(base)
        for key, value in zip(keys, values):
            _set_dotted(cell, key, value)
        tag = "_".join(f"{k.split('.')[-1]}-{v}" for k, v in zip(keys, values))
        cell["output"] = str(Path(base.get("output", "ec_eigen_out")) / f"cell{i:03d}_{tag}")
        cells.append(cell)
    return cells


def load_config_file(path) -> list[ExperimentConfig]:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    raws = raw if isinstance(raw, list) else expand_grid(raw)
    return [ExperimentConfig.from_dict(r) for r in raws]
