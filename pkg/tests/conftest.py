import numpy as np
import pytest

from ec_eigen.coding import CodingMatrix, build_staggered_coding_matrix
from ec_eigen.redundancy import compute_redundancy

EX_E = np.array([[0.98, 0.42], [0.13, 0.39], [0.53, 0.85], [0.87, 0.93]])

ACCEPTANCE_LINES = []


def tridiag4():
    return np.diag([2.0] * 4) + np.diag([-1.0] * 3, 1) + np.diag([-1.0] * 3, -1)


def random_symmetric(n, rng):
    A = rng.standard_normal((n, n))
    return (A + A.T) / 2


def random_fault_rows(E, size, rng, max_tries=100):
    """Random recoverable fault set (rows of E independent)."""
    from ec_eigen.coding import check_submatrix_rank

    for _ in range(max_tries):
        rows = rng.choice(E.n, size=size, replace=False)
        if check_submatrix_rank(E, rows):
            return [int(r) for r in rows]
    raise RuntimeError("no recoverable fault set found")


@pytest.fixture
def ex_A():
    return tridiag4()


@pytest.fixture
def ex_E():
    return CodingMatrix.from_dense(EX_E)


@pytest.fixture
def ex_blocks(ex_A, ex_E):
    return compute_redundancy(ex_A, ex_E)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def acceptance_report():
    def report(number, passed, detail):
        line = f"[criterion {number:>2}] {'PASS' if passed else 'FAIL'}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)

    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def staggered(n, k, p, seed=0):
    return build_staggered_coding_matrix(n, k, p, seed)
