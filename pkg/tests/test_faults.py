import numpy as np
import pytest

from ec_eigen.coding import CodingMatrix, build_staggered_coding_matrix
from ec_eigen.errors import CapacityExceededError, ConfigError, DuplicateFaultError, SingularCodingError
from ec_eigen.faults import FaultEvent, FaultSchedule, FaultState, apply_fault, generate_schedule, node_rows


def test_event_validation():
    assert FaultEvent(3, (5, 1)).rows == (1, 5)
    with pytest.raises(ConfigError):
        FaultEvent(1, ())
    with pytest.raises(ConfigError):
        FaultEvent(0, (1,))
    with pytest.raises(ConfigError):
        FaultEvent(1, (2, 2))


def test_schedule_none():
    s = generate_schedule("none", 10, 2)
    assert s.events == () and s.total_erasures == 0


def test_schedule_single():
    s = generate_schedule("single", 4, 2, {"rows": [2], "iteration": 1})
    assert s.events == (FaultEvent(1, (2,)),)


def test_schedule_multi_random():
    s = generate_schedule("multi-random", 100, 8, {"count": 3, "rows_per_event": 1, "iteration_range": (1, 50)}, seed=11)
    its = [e.iteration for e in s.events]
    rows = [r for e in s.events for r in e.rows]
    assert len(s.events) == 3
    assert all(b > a for a, b in zip(its, its[1:]))
    assert all(1 <= i <= 50 for i in its)
    assert len(set(rows)) == 3
    assert s == generate_schedule("multi-random", 100, 8, {"count": 3, "iteration_range": (1, 50)}, seed=11)


def test_schedule_capacity():
    with pytest.raises(CapacityExceededError):
        generate_schedule("multi-random", 100, 2, {"count": 3}, seed=0)
    s = generate_schedule("multi-random", 100, 2, {"count": 3}, seed=0, enforce_capacity=False)
    assert s.total_erasures == 3


def test_schedule_order_and_json(tmp_path):
    with pytest.raises(ConfigError):
        FaultSchedule("single", (FaultEvent(5, (1,)), FaultEvent(5, (2,))))
    with pytest.raises(ConfigError):
        FaultSchedule("bogus")
    s = FaultSchedule("multi-random", (FaultEvent(2, (1,)), FaultEvent(7, (4, 3))), seed=3)
    s.save(tmp_path / "s.json")
    assert FaultSchedule.load(tmp_path / "s.json") == s
    assert s.to_dict() == {"mode": "multi-random", "seed": 3, "events": [{"iteration": 2, "rows": [1]}, {"iteration": 7, "rows": [3, 4]}]}


def test_apply_fault_worked_example(ex_E):
    state = apply_fault(FaultState.empty(2), FaultEvent(1, (2,)), ex_E)
    assert state.all_faulty == (2,)
    assert state.columns == (0,)
    assert np.allclose(state.E_F(ex_E), [[0.53]])
    # upper Cholesky factor of E_F^T E_F = [[0.2809]]
    assert np.allclose(state.chol_EF[0], [[0.53]])


def test_capacity_and_duplicates(ex_E):
    state = apply_fault(FaultState.empty(2), FaultEvent(1, (0, 2)), ex_E)
    with pytest.raises(CapacityExceededError):
        apply_fault(state, FaultEvent(2, (1,)), ex_E)
    one = apply_fault(FaultState.empty(2), FaultEvent(1, (2,)), ex_E)
    with pytest.raises(DuplicateFaultError):
        apply_fault(one, FaultEvent(2, (2,)), ex_E)


def test_sequential_equals_batched_dense(rng):
    E = CodingMatrix.from_dense(rng.uniform(0.1, 1.0, (30, 5)))
    seq = FaultState.empty(5)
    for it, r in enumerate([3, 11, 20], start=1):
        seq = apply_fault(seq, FaultEvent(it, (r,)), E)
    batch = apply_fault(FaultState.empty(5), FaultEvent(1, (3, 11, 20)), E)
    assert seq.all_faulty == batch.all_faulty
    assert seq.columns == batch.columns == (0, 1, 2)
    assert np.allclose(seq.chol_EF[0], batch.chol_EF[0])


def test_sparse_assignment_picks_a_usable_column():
    E = build_staggered_coding_matrix(100, 10, 3, seed=1)
    # row 95 lives in band 9: columns {9, 0, 1}; row 50 in band 5: columns {5, 6, 7}
    state = apply_fault(FaultState.empty(10), FaultEvent(1, (50,)), E)
    assert state.columns == (5,)
    state = apply_fault(state, FaultEvent(2, (95,)), E)
    assert state.columns == (5, 0)
    EF = state.E_F(E)
    assert abs(np.linalg.det(EF)) > 0
    L = np.triu(state.chol_EF[0])
    assert np.allclose(L.T @ L, EF.T @ EF)


def test_unrecoverable_pattern():
    E = build_staggered_coding_matrix(40, 8, 2, seed=0)
    # rows 0, 1, 2 all sit in band 0 (columns {0, 1})
    with pytest.raises(SingularCodingError):
        apply_fault(FaultState.empty(8), FaultEvent(1, (0, 1, 2)), E)


def test_replay_is_deterministic():
    E = build_staggered_coding_matrix(200, 8, 3, seed=2)
    sched = generate_schedule("multi-random", 200, 8, {"count": 4, "rows_per_event": 2, "iteration_range": (1, 30)}, seed=5)

    def replay():
        st, states = FaultState.empty(8), []
        for ev in sched.events:
            st = apply_fault(st, ev, E)
            states.append((st.order, st.columns, st.chol_EF[0].copy()))
        return states

    for (o1, c1, l1), (o2, c2, l2) in zip(replay(), replay()):
        assert o1 == o2 and c1 == c2 and np.array_equal(l1, l2)


def test_state_invariants_after_random_sequences(rng):
    E = build_staggered_coding_matrix(300, 12, 4, seed=3)
    for trial in range(20):
        sched = generate_schedule("multi-random", 300, 12, {"count": 4, "rows_per_event": 3, "iteration_range": (1, 40)}, seed=trial)
        st = FaultState.empty(12)
        try:
            for ev in sched.events:
                st = apply_fault(st, ev, E)
        except SingularCodingError:
            continue
        assert st.count <= 12
        assert set(st.all_faulty) == {r for ev in st.events for r in ev.rows}
        EF = st.E_F(E)
        assert np.all(np.linalg.eigvalsh(EF.T @ EF) > 0)
        L = np.triu(st.chol_EF[0])
        G = EF.T @ EF
        assert np.linalg.norm(L.T @ L - G) <= 1e-12 * np.linalg.norm(G)


def test_node_rows():
    assert list(node_rows(10, 3, 0)) == [0, 1, 2]
    assert sum(len(node_rows(10, 3, i)) for i in range(3)) == 10
    ev = FaultEvent.for_node(4, 10, 5, 2)
    assert ev.rows == (4, 5) and ev.iteration == 4
