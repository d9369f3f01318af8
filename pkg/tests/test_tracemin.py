import numpy as np
import pytest
import scipy.sparse as sp

from ec_eigen.coding import build_staggered_coding_matrix
from ec_eigen.errors import CGBreakdownError, ConfigError, RankDeficientBlockError
from ec_eigen.faults import FaultEvent, FaultSchedule
from ec_eigen.harness.matrices import gapped_spectrum, planted
from ec_eigen.operators import FaultAwareSystem, PlainSystem, reconstitute_explicit
from ec_eigen.recovery import normalize_columns
from ec_eigen.tracemin import CGParams, TraceMinConfig, b_orthonormalize, cg_solve, tracemin_solve

from conftest import random_fault_rows

TRUE4 = np.array([0.381966, 1.381966, 2.618034, 3.618034])


def test_cg_identity():
    B = np.arange(12.0).reshape(6, 2) + 1
    X, its = cg_solve(lambda V: V, B)
    assert its == 1 and np.allclose(X, B)


def test_cg_tridiagonal_4(ex_A):
    e1 = np.eye(4)[:, 0]
    x, _ = cg_solve(lambda V: ex_A @ V, e1, CGParams(200, 1e-6))
    exact = np.linalg.solve(ex_A, e1)
    assert np.linalg.norm(ex_A @ x - e1) <= 1e-6
    assert np.allclose(x, exact, atol=1e-6)


def test_cg_ill_conditioned_iteration_bound():
    D = np.diag([1.0, 1e4])
    b = np.array([1.0, 1.0])
    x, its = cg_solve(lambda V: D @ V, b, CGParams(200, 1e-10))
    assert np.allclose(D @ x, b)
    assert its <= int(np.ceil(np.sqrt(1e4)))
    # two distinct eigenvalues: exact arithmetic finishes in two steps
    assert its <= 3


def test_cg_breakdown():
    with pytest.raises(CGBreakdownError, match="shift"):
        cg_solve(lambda V: np.diag([1.0, -2.0, 3.0]) @ V, np.ones(3))


def test_b_orthonormalize_identity(rng):
    Z = rng.standard_normal((10, 4))
    V = b_orthonormalize(Z, PlainSystem(np.eye(10)))
    assert np.abs(V.T @ V - np.eye(4)).max() <= 1e-12
    Q = np.linalg.qr(Z)[0]
    assert np.allclose(np.abs(V), np.abs(Q), atol=1e-12)  # thin QR up to column signs


def test_b_orthonormalize_reconstituted_B(ex_A, ex_E, ex_blocks, rng):
    sys = FaultAwareSystem(ex_A, ex_E).with_fault(FaultEvent(1, (2,)))
    _, Bp = reconstitute_explicit(ex_A, ex_E, ex_blocks, sys.fault)
    Z = rng.standard_normal((4, 2))
    V = b_orthonormalize(Z, sys)
    assert np.abs(V.T @ Bp @ V - np.eye(2)).max() <= 1e-10
    # same span: Z is reproduced by V up to a 2x2 change of basis
    C = np.linalg.lstsq(V, Z, rcond=None)[0]
    assert np.linalg.norm(V @ C - Z) <= 1e-12 * np.linalg.norm(Z)


def test_b_orthonormalize_duplicate_column(rng):
    Z = rng.standard_normal((8, 3))
    Z[:, 2] = Z[:, 0]
    sys = PlainSystem(np.eye(8))
    with pytest.raises(RankDeficientBlockError):
        b_orthonormalize(Z, sys, retry=False)
    V = b_orthonormalize(Z, sys, np.random.default_rng(3))
    assert np.abs(V.T @ V - np.eye(3)).max() <= 1e-12


def test_worked_example_no_faults(ex_A, ex_E):
    res = tracemin_solve(FaultAwareSystem(ex_A, ex_E), None, TraceMinConfig(s=2, tol=1e-8))
    assert res.converged
    assert res.eigenvalues == pytest.approx(TRUE4[:2], abs=1e-6)


def test_diagonal_three_smallest():
    A = sp.diags(np.arange(1.0, 11.0)).tocsr()
    E = build_staggered_coding_matrix(10, 2, 2)
    res = tracemin_solve(FaultAwareSystem(A, E), None, TraceMinConfig(s=3, tol=1e-8))
    assert res.converged
    assert np.abs(res.eigenvalues - [1.0, 2.0, 3.0]).max() <= 1e-8 * sp.linalg.norm(A)


def test_worked_example_with_fault_recovers_vectors(ex_A, ex_E):
    sched = FaultSchedule("single", (FaultEvent(1, (2,)),))
    res = tracemin_solve(FaultAwareSystem(ex_A, ex_E), sched, TraceMinConfig(s=2, tol=1e-8))
    assert res.converged
    assert res.eigenvalues == pytest.approx(TRUE4[:2], abs=1e-6)
    _, X = np.linalg.eigh(ex_A)
    got = res.recovered.eigenvectors
    assert np.allclose(got, normalize_columns(X[:, :2]), atol=1e-6)


def test_b_orthonormal_every_iteration():
    A = planted(gapped_spectrum(60), seed=2)
    E = build_staggered_coding_matrix(60, 4, 3, seed=5)
    rows = random_fault_rows(E, 3, np.random.default_rng(4))
    sched = FaultSchedule("multi-random", (FaultEvent(2, tuple(rows[:1])), FaultEvent(4, tuple(rows[1:]))))
    worst = []

    def check(it, V, sys):
        G = V.T @ sys.apply_B(V)
        worst.append(np.abs(G - np.eye(V.shape[1])).max())

    res = tracemin_solve(FaultAwareSystem(A, E), sched, TraceMinConfig(s=3, tol=1e-8, seed=1), callback=check)
    assert res.converged
    assert len(worst) == res.iterations and max(worst) <= 1e-8
    lam = np.sort(gapped_spectrum(60))[:3]
    assert np.abs(res.eigenvalues - lam).max() <= 10 * 1e-8 * np.linalg.norm(A, 2)
    assert res.recovered.residuals(A).max() <= 1e-7 * np.linalg.norm(A)


def test_trace_non_increasing_without_faults():
    A = planted(gapped_spectrum(50), seed=6)
    E = build_staggered_coding_matrix(50, 3, 2)
    cfg = TraceMinConfig(s=3, tol=1e-9, seed=2)
    res = tracemin_solve(FaultAwareSystem(A, E), None, cfg)
    tr = [h.trace for h in res.history]
    slack = 10 * cfg.cg.tol * np.linalg.norm(A)
    assert all(b <= a + slack for a, b in zip(tr, tr[1:]))
    assert all(h.cg_iterations > 0 for h in res.history[:-1])


def test_indefinite_matrix_fails_loudly():
    A = np.diag(np.linspace(-3.0, 5.0, 12))
    E = build_staggered_coding_matrix(12, 2, 2)
    with pytest.raises(CGBreakdownError) as info:
        tracemin_solve(FaultAwareSystem(A, E), None, TraceMinConfig(s=2))
    assert info.value.result.status == "CGBreakdownError"


def test_config_validation(ex_A, ex_E):
    with pytest.raises(ConfigError):
        tracemin_solve(FaultAwareSystem(ex_A, ex_E), None, TraceMinConfig(s=3))
    assert TraceMinConfig(s=5).block_size == 10
