"""Matrix sources: Matrix Market files, CSV feature tables and generators."""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..errors import AsymmetricInputError, ConfigError, MatrixParseError
from ..redundancy import SYM_TOL, symmetry_defect

log = logging.getLogger(__name__)

# Inputs within this relative asymmetry are symmetrized with a warning; beyond it they are rejected.
LOAD_SYM_TOL = 1e-8


def tridiagonal(n, diag=2.0, off=-1.0):
    return sp.diags([np.full(n - 1, off), np.full(n, diag), np.full(n - 1, off)], [-1, 0, 1], format="csr")


def random_spd(n, density=0.01, seed=0):
    """Sparse SPD matrix: random symmetric off-diagonal pattern plus a dominant diagonal.

    The diagonal is the absolute row sum plus a random permutation of ``1..n``,
    which keeps the matrix strictly diagonally dominant and spreads the spectrum.
    """
    rng = np.random.default_rng(seed)
    S = sp.random(n, n, density=density, random_state=rng, format="csr",
                  data_rvs=lambda size: rng.uniform(-1.0, 1.0, size))
    S = sp.triu(S, 1)
    S = S + S.T
    d = np.asarray(abs(S).sum(axis=1)).ravel() + rng.permutation(np.arange(1, n + 1))
    return sp.csr_matrix(S + sp.diags(d))


def gapped_spectrum(n, low=8, high=8):
    """Eigenvalues ``1..low``, a cluster in ``[10, 50]``, then ``100, 200, ...`` at the top."""
    if n < low + high + 1:
        raise ConfigError(f"gapped spectrum needs n >= {low + high + 1}")
    mid = np.linspace(10.0, 50.0, n - low - high)
    return np.concatenate([np.arange(1.0, low + 1), mid, 100.0 * np.arange(1, high + 1)])


def planted(eigenvalues, seed=0):
    """Dense symmetric ``Q diag(eigenvalues) Q^T`` with Haar-random orthogonal ``Q``."""
    lam = np.asarray(eigenvalues, dtype=float)
    rng = np.random.default_rng(seed)
    Q, Rq = np.linalg.qr(rng.standard_normal((lam.size, lam.size)))
    Q *= np.sign(np.diag(Rq))[None, :]
    A = (Q * lam[None, :]) @ Q.T
    return 0.5 * (A + A.T)


def covariance_from_csv(path):
    """Gram matrix of the centred feature columns of a numeric CSV (rows = samples)."""
    try:
        X = np.loadtxt(path, delimiter=",", ndmin=2)
    except ValueError:
        X = np.loadtxt(path, delimiter=",", ndmin=2, skiprows=1)
    X = X - X.mean(axis=0, keepdims=True)
    return (X.T @ X) / max(X.shape[0] - 1, 1)


def _locate_mm_error(path) -> int | None:
    """Line number of the first malformed line in a Matrix Market file, if any."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].lower().startswith("%%matrixmarket"):
        return 1
    header = lines[0].lower().split()
    if len(header) < 5:
        return 1
    fmt, field = header[2], header[3]
    per_entry = {"coordinate": 3, "array": 1}.get(fmt)
    if per_entry is None:
        return 1
    if field == "pattern":
        per_entry -= 1
    if field == "complex":
        per_entry += 1
    size_line = None
    for i, line in enumerate(lines[1:], start=2):
        s = line.strip()
        if not s or s.startswith("%"):
            continue
        tokens = s.split()
        try:
            [float(t) for t in tokens]
        except ValueError:
            return i
        if size_line is None:
            size_line = i
            if len(tokens) != (3 if fmt == "coordinate" else 2):
                return i
            continue
        if len(tokens) != per_entry:
            return i
    return None


def read_matrix_market(path):
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"matrix file not found: {path}")
    try:
        M = scipy.io.mmread(str(path))
    except Exception as exc:
        raise MatrixParseError(str(exc), line=_locate_mm_error(path)) from exc
    return sp.csr_matrix(M) if sp.issparse(M) else np.asarray(M, dtype=float)


def _symmetric_or_fail(A):
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise AsymmetricInputError(f"matrix must be square, got shape {A.shape}")
    defect = symmetry_defect(A)
    if defect > LOAD_SYM_TOL:
        raise AsymmetricInputError(f"matrix is not symmetric (relative defect {defect:.3e})")
    if defect > 0:
        if defect > SYM_TOL:
            log.warning("symmetrizing input with relative asymmetry %.3e", defect)
        A = 0.5 * (A + A.T)
        A = sp.csr_matrix(A) if sp.issparse(A) else np.asarray(A)
    return A


def load_matrix(spec):
    """Resolve a matrix spec (path string or generator dict) to a symmetric matrix.

    Generator kinds: ``tridiagonal``, ``identity``, ``diagonal``, ``random-spd``,
    ``planted`` (explicit ``eigenvalues`` or ``profile: gapped``),
    ``covariance-from-csv`` and ``file``.
    """
    if isinstance(spec, (str, Path)):
        spec = {"kind": "file", "path": str(spec)}
    kind = spec.get("kind")
    if kind == "file":
        A = read_matrix_market(spec["path"])
    elif kind == "tridiagonal":
        A = tridiagonal(int(spec["n"]), spec.get("diag", 2.0), spec.get("off", -1.0))
    elif kind == "identity":
        A = sp.identity(int(spec["n"]), format="csr")
    elif kind == "diagonal":
        A = sp.diags(np.asarray(spec["values"], dtype=float), format="csr")
    elif kind == "random-spd":
        A = random_spd(int(spec["n"]), float(spec.get("density", 0.01)), int(spec.get("seed", 0)))
    elif kind == "planted":
        lam = spec.get("eigenvalues")
        if lam is None:
            if spec.get("profile", "gapped") != "gapped":
                raise ConfigError(f"unknown spectrum profile {spec.get('profile')!r}")
            lam = gapped_spectrum(int(spec["n"]))
        A = planted(lam, int(spec.get("seed", 0)))
    elif kind == "covariance-from-csv":
        path = Path(spec["path"])
        if not path.exists():
            raise ConfigError(f"CSV file not found: {path}")
        A = covariance_from_csv(path)
    else:
        raise ConfigError(f"unknown matrix kind {kind!r}")
    return _symmetric_or_fail(A)


def oracle_eigenvalues(A, count, which="smallest"):
    """Dense symmetric eigensolve; ``which`` is ``smallest``, ``largest`` or ``largest-magnitude``."""
    import scipy.linalg as sla

    Ad = A.toarray() if sp.issparse(A) else np.asarray(A)
    lam = sla.eigh(Ad, eigvals_only=True)
    if which == "smallest":
        return lam[:count]
    if which == "largest":
        return lam[::-1][:count]
    if which == "largest-magnitude":
        return lam[np.argsort(-np.abs(lam), kind="stable")][:count]
    raise ConfigError(f"unknown oracle selection {which!r}")


def estimate_min_eigenvalue(A) -> float:
    """Smallest eigenvalue estimate (Lanczos, falling back to the Gershgorin bound)."""
    try:
        return float(spla.eigsh(A, k=1, which="SA", return_eigenvectors=False, tol=1e-6)[0])
    except Exception:
        Ad = abs(A)
        diag = A.diagonal() if sp.issparse(A) else np.diag(A)
        radius = np.asarray(Ad.sum(axis=1)).ravel() - np.abs(diag)
        return float(np.min(diag - radius))
