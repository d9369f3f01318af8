"""Run configured experiments, persist results and compare runs."""

from __future__ import annotations

import csv
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from ..coding import build_staggered_coding_matrix, default_p
from ..errors import ECEigenError, IncompatibleResultsError
from ..faults import FaultSchedule, generate_schedule
from ..operators import ExplicitSystem, FaultAwareSystem, PlainSystem, reconstitute_explicit
from ..power import PowerConfig, power_solve
from ..redundancy import compute_redundancy, load_blocks
from ..results import PHASES, EigenResult
from ..tracemin import CGParams, TraceMinConfig, tracemin_solve
from .config import ExperimentConfig
from .matrices import estimate_min_eigenvalue, load_matrix, oracle_eigenvalues

log = logging.getLogger(__name__)

ORACLE_MAX_N = 2000


def resolve_shift(cfg: ExperimentConfig, A) -> float:
    if cfg.shift in (None, False, 0):
        return 0.0
    if cfg.shift == "auto":
        norm = sp.linalg.norm(A) if sp.issparse(A) else np.linalg.norm(A)
        return max(0.0, -estimate_min_eigenvalue(A) + 0.01 * norm)
    return float(cfg.shift)


def build_coding(cfg: ExperimentConfig, A):
    """Return ``(E, blocks, encode_seconds)``; ``(None, None, 0)`` without coding."""
    if not cfg.coding:
        return None, None, 0.0
    if "blocks" in cfg.coding:
        E, blocks, meta = load_blocks(cfg.coding["blocks"])
        return E, blocks, float(meta.get("encode_time", 0.0))
    n = A.shape[0]
    k = int(cfg.coding["k"])
    p = cfg.coding.get("p", "auto")
    p = default_p(k) if p in (None, "auto") else int(p)
    t0 = time.perf_counter()
    E = build_staggered_coding_matrix(n, k, p, int(cfg.coding.get("seed", cfg.seed)))
    blocks = compute_redundancy(A, E)
    return E, blocks, time.perf_counter() - t0


def build_schedule(cfg: ExperimentConfig, n: int, k: int) -> FaultSchedule:
    sched = dict(cfg.schedule or {"mode": "none"})
    if sched.get("events"):
        return FaultSchedule.from_dict(sched)
    mode = sched.pop("mode", "none")
    seed = int(sched.pop("seed", cfg.seed))
    # capacity is enforced by the solver at the offending iteration so history survives
    return generate_schedule(mode, n, k, sched, seed=seed, enforce_capacity=False)


def solve(cfg: ExperimentConfig, A, E, blocks, schedule, on_fault="recover", name=None) -> EigenResult:
    if on_fault == "restart" or E is None:
        system = PlainSystem(A)
    elif cfg.solver == "power-explicit":
        system = ExplicitSystem(A, E, blocks)
    else:
        system = FaultAwareSystem(A, E, blocks)
    name = name or cfg.solver
    if cfg.solver == "tracemin":
        tcfg = TraceMinConfig(s=cfg.s, tol=cfg.tol, max_outer=cfg.max_iterations,
                              cg=CGParams(**cfg.cg), seed=cfg.seed)
        return tracemin_solve(system, schedule, tcfg, on_fault=on_fault, name=name)
    pcfg = PowerConfig(m=cfg.s, tol=cfg.tol, max_iterations=cfg.max_iterations, seed=cfg.seed)
    return power_solve(system, schedule, pcfg, on_fault=on_fault, name=name)


def _unshift(result: EigenResult, shift: float):
    if shift:
        result.eigenvalues = result.eigenvalues - shift
        if result.recovered is not None:
            result.recovered.eigenvalues = result.recovered.eigenvalues - shift


def write_history(result: EigenResult, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iter", "r_rel", "wall_time", *PHASES, "fault_rows", "cg_iterations", "trace"])
        for h in result.history:
            rows = ";".join(",".join(map(str, r)) for r in h.fault) if h.fault else ""
            w.writerow([h.iter, repr(h.r_rel), h.wall_time, *(h.phase_times.get(p, 0.0) for p in PHASES),
                        rows, "" if h.cg_iterations is None else h.cg_iterations,
                        "" if h.trace is None else repr(h.trace)])


def write_timing(result: EigenResult, path, encode_time=0.0):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["phase", "total", "median"])
        for phase, t in result.timing().items():
            w.writerow([phase, t["total"], t["median"]])
        w.writerow(["encode", encode_time, encode_time])


def _persist(result: EigenResult, out: Path, extra: dict, A=None, save_vectors=False):
    out.mkdir(parents=True, exist_ok=True)
    payload = result.to_dict()
    payload.update(extra)
    payload["wall_time_total"] = float(sum(h.wall_time for h in result.history))
    if result.recovered is not None and A is not None and result.history:
        payload["recovery"] = result.recovered.to_dict(A)
    (out / "results.json").write_text(json.dumps(payload, indent=2))
    write_history(result, out / "history.csv")
    write_timing(result, out / "timing.csv", extra.get("encode_time", 0.0))
    if save_vectors and result.recovered is not None:
        import scipy.io

        scipy.io.mmwrite(str(out / "eigenvectors.mtx"), result.recovered.eigenvectors, precision=17)


def _explicit_check(A, E, blocks, fault) -> float | None:
    """Max relative gap between implicit operators and explicitly reconstituted ``A'``/``B'``."""
    if fault.count == 0:
        return None
    sys = FaultAwareSystem(A, E, blocks, fault)
    Ap, Bp = reconstitute_explicit(A, E, blocks, fault)
    I = np.eye(A.shape[0])
    gaps = [np.abs(sys.apply_A(I) - Ap).max() / max(np.abs(Ap).max(), 1.0),
            np.abs(sys.apply_B(I) - Bp).max() / max(np.abs(Bp).max(), 1.0),
            np.abs(Bp @ sys.solve_B(I) - I).max()]
    return float(max(gaps))


def run_experiment(cfg: ExperimentConfig) -> EigenResult:
    """Run one configuration and write results.json, history.csv and timing.csv.

    Solver errors are persisted (status + partial history) and then re-raised.
    """
    cfg = cfg.with_seed_override()
    out = Path(cfg.output)
    A0 = load_matrix(cfg.matrix)
    shift = resolve_shift(cfg, A0)
    A = A0 + shift * (sp.identity(A0.shape[0], format="csr") if sp.issparse(A0) else np.eye(A0.shape[0])) if shift else A0
    n = A.shape[0]
    E, blocks, encode_time = build_coding(cfg, A)
    schedule = build_schedule(cfg, n, E.k if E is not None else 0)
    erased = schedule.total_erasures
    extra = {
        "config": cfg.to_dict(), "n": n, "shift": shift, "encode_time": encode_time,
        "schedule": schedule.to_dict(), "erased_rows": erased, "erased_fraction": erased / n,
    }
    baseline = None
    if cfg.baseline == "restart-on-fault":
        try:
            baseline = solve(cfg, A, None, None, schedule, on_fault="restart", name=f"{cfg.solver}-restart")
        except ECEigenError as exc:
            baseline = getattr(exc, "result", None)
        if baseline is not None:
            _unshift(baseline, shift)
            _persist(baseline, out / "baseline", {"config": cfg.to_dict(), "n": n, "shift": shift})
            extra["baseline"] = {"iterations": baseline.iterations, "status": baseline.status,
                                 "wall_time_total": float(sum(h.wall_time for h in baseline.history))}
    try:
        result = solve(cfg, A, E, blocks, schedule)
    except ECEigenError as exc:
        partial = getattr(exc, "result", None)
        if partial is not None:
            _unshift(partial, shift)
            partial.config = cfg.to_dict()
            _persist(partial, out, extra)
        else:
            out.mkdir(parents=True, exist_ok=True)
            (out / "results.json").write_text(json.dumps({**extra, "status": type(exc).__name__, "error": str(exc)}, indent=2))
        raise
    _unshift(result, shift)
    result.config = cfg.to_dict()
    if cfg.explicit_check and E is not None:
        extra["explicit_check"] = _explicit_check(A, E, blocks, result.fault_state)
    _persist(result, out, extra, A=A0, save_vectors=cfg.save_vectors)
    return result


def _run_cell(raw: dict):
    cfg = ExperimentConfig.from_dict(raw)
    try:
        res = run_experiment(cfg)
        return cfg.output, res.status, None, None
    except ECEigenError as exc:
        return cfg.output, type(exc).__name__, exc.exit_code, str(exc)


def run_many(cfgs: list[ExperimentConfig], jobs: int = 1):
    """Run grid cells, up to ``jobs`` at a time; each cell owns its output directory."""
    raws = [c.to_dict() for c in cfgs]
    if jobs <= 1 or len(raws) == 1:
        return [_run_cell(r) for r in raws]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_cell, raws))


def load_result(directory) -> dict:
    path = Path(directory) / "results.json"
    if not path.exists():
        raise IncompatibleResultsError(f"no results.json in {directory}")
    d = json.loads(path.read_text())
    d.setdefault("label", Path(directory).name)
    return d


def _oracle_selection(solver):
    return "smallest" if solver == "tracemin" else "largest-magnitude"


def compare_runs(results: list[dict], A=None) -> list[dict]:
    """One row per run: iterations, wall time, overheads vs the first no-fault run, oracle error.

    ``results`` are ``results.json`` payloads.  The oracle column is filled
    when the matrix has at most ``ORACLE_MAX_N`` rows.
    """
    if not results:
        raise IncompatibleResultsError("nothing to compare")
    mats = {json.dumps(r["config"]["matrix"], sort_keys=True) for r in results}
    counts = {len(r["eigenvalues"]) for r in results}
    if len(mats) > 1 or len(counts) > 1:
        raise IncompatibleResultsError("results differ in matrix or wanted eigenpair count")
    ref = next((r for r in results if not r.get("fault_log")), results[0])
    if A is None and results[0].get("n", ORACLE_MAX_N + 1) <= ORACLE_MAX_N:
        A = load_matrix(results[0]["config"]["matrix"])
    count = counts.pop()
    rows = []
    for r in results:
        err = ""
        if A is not None and A.shape[0] <= ORACLE_MAX_N and r["eigenvalues"]:
            oracle = oracle_eigenvalues(A, count, _oracle_selection(r["config"]["solver"]))
            got = np.asarray(r["eigenvalues"])
            err = float(np.max(np.abs(got - oracle) / np.maximum(np.abs(oracle), 1e-300)))
        rows.append({
            "scenario": r.get("label", r["solver"]),
            "iterations": r["iterations"],
            "wall_time": r.get("wall_time_total", 0.0),
            "iter_overhead_vs_no_fault": (r["iterations"] - ref["iterations"]) / max(ref["iterations"], 1),
            "time_overhead": (r.get("wall_time_total", 0.0) - ref.get("wall_time_total", 0.0)) / max(ref.get("wall_time_total", 0.0), 1e-12),
            "max_eigenvalue_error_vs_oracle": err,
        })
    return rows


def write_comparison(rows: list[dict], path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
