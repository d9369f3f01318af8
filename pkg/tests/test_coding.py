import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st
from scipy.sparse.csgraph import structural_rank

from ec_eigen.coding import (
    CodingMatrix,
    build_staggered_coding_matrix,
    check_submatrix_rank,
    default_p,
    load_coding_matrix,
    rank_failure_bound,
    sampled_rank_failure_rate,
    save_coding_matrix,
)
from ec_eigen.errors import InvalidDimensionsError

from conftest import EX_E


def test_smallest_instance():
    E = build_staggered_coding_matrix(1, 1, 1, seed=0)
    assert E.shape == (1, 1)
    assert E.nnz == 1
    assert E.toarray()[0, 0] != 0


def test_small_pattern_by_inspection():
    E = build_staggered_coding_matrix(8, 4, 2, seed=1)
    dense = E.toarray()
    assert (np.count_nonzero(dense, axis=1) == 2).all()
    # band height ceil(8/4) = 2, window of 2 columns walking one column per band
    expected = [{0, 1}, {0, 1}, {1, 2}, {1, 2}, {2, 3}, {2, 3}, {3, 0}, {3, 0}]
    assert [set(np.flatnonzero(r)) for r in dense] == expected
    counts = np.count_nonzero(dense, axis=0)
    assert counts.max() - counts.min() <= 2


@pytest.mark.parametrize("n,k,p", [(0, 1, 1), (3, 4, 1), (5, 3, 4), (5, 3, 0)])
def test_invalid_dimensions(n, k, p):
    with pytest.raises(InvalidDimensionsError):
        build_staggered_coding_matrix(n, k, p, 0)


def test_deterministic_bitwise():
    a = build_staggered_coding_matrix(97, 11, 3, seed=5)
    b = build_staggered_coding_matrix(97, 11, 3, seed=5)
    c = build_staggered_coding_matrix(97, 11, 3, seed=6)
    assert np.array_equal(a.entries.data, b.entries.data)
    assert np.array_equal(a.entries.indices, b.entries.indices)
    assert not np.array_equal(a.entries.data, c.entries.data)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 120), st.data())
def test_type_invariants(n, data):
    k = data.draw(st.integers(1, n))
    p = data.draw(st.integers(1, k))
    seed = data.draw(st.integers(0, 2**31))
    E = build_staggered_coding_matrix(n, k, p, seed)
    dense = E.toarray()
    assert E.nnz <= n * p
    assert (np.count_nonzero(dense, axis=1) <= p).all()
    vals = E.entries.data
    assert ((vals >= 0.1) & (vals < 1.0)).all()
    h = math.ceil(n / k)
    for i in range(n):
        window = {(i // h + t) % k for t in range(p)}
        assert set(np.flatnonzero(dense[i])) <= window
    bands = math.ceil(n / h)
    covered = {(b + t) % k for b in range(bands) for t in range(p)}
    assert set(np.flatnonzero(np.count_nonzero(dense, axis=0))) == covered


@pytest.mark.parametrize("k", [1, 2, 3, 5, 20, 1000])
def test_default_p_formula(k):
    if k < 3:
        expected = min(k, 2)
    else:
        expected = min(k, math.ceil(math.log(k) / math.log(math.log(k))) + 1)
    assert default_p(k) == expected


def test_default_p_values():
    assert default_p(1) == 1
    assert default_p(20) == 4
    assert default_p(1000) == 5
    assert default_p(3) == 3  # formula gives 13, capped at k


def test_rank_worked_example():
    E = CodingMatrix.from_dense(EX_E)
    assert check_submatrix_rank(E, [2, 3])
    assert check_submatrix_rank(E, [])
    assert not check_submatrix_rank(E, [0, 1, 2])
    with pytest.raises(IndexError):
        check_submatrix_rank(E, [4])
    with pytest.raises(ValueError):
        check_submatrix_rank(E, [1, 1])


def test_rows_sharing_a_window_are_independent():
    E = build_staggered_coding_matrix(40, 8, 3, seed=2)
    # rows 0..4 form band 0 (height 5); any 3 of them share columns {0,1,2}
    assert check_submatrix_rank(E, [0, 1, 2])
    assert check_submatrix_rank(E, [1, 3, 4])
    assert not check_submatrix_rank(E, [0, 1, 2, 3])


def test_rank_check_agrees_with_structural_rank():
    # continuous random values: numerical rank equals the generic (matching) rank
    E = build_staggered_coding_matrix(100, 10, 4, seed=7)
    rng = np.random.default_rng(0)
    disagree = 0
    for _ in range(1000):
        rows = rng.choice(100, size=10, replace=False)
        generic = structural_rank(sp.csr_matrix(E.rows(rows))) == 10
        disagree += generic != check_submatrix_rank(E, rows)
    assert disagree == 0


def test_failure_rate_helper_matches_manual_count():
    E = build_staggered_coding_matrix(60, 6, 3, seed=4)
    rate = sampled_rank_failure_rate(E, trials=200, seed=9)
    rng = np.random.default_rng(9)
    manual = sum(not check_submatrix_rank(E, rng.choice(60, 6, replace=False)) for _ in range(200)) / 200
    assert rate == manual


def test_failure_bound_value():
    assert rank_failure_bound(4) == pytest.approx((math.e / 5) ** 5)
    assert rank_failure_bound(4) == pytest.approx(0.0475, abs=1e-4)


def test_matrix_market_round_trip(tmp_path):
    E = build_staggered_coding_matrix(30, 5, 2, seed=3)
    save_coding_matrix(E, tmp_path / "E")
    assert (tmp_path / "E.mtx").read_text().startswith("%%MatrixMarket matrix coordinate")
    F = load_coding_matrix(tmp_path / "E")
    assert (F.n, F.k, F.p, F.seed) == (30, 5, 2, 3)
    assert np.array_equal(F.toarray(), E.toarray())
