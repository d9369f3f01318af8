"""Erasure-coded fault-tolerant symmetric eigensolvers."""

from .coding import CodingMatrix, build_staggered_coding_matrix, check_submatrix_rank, default_p
from .errors import CapacityExceededError, ECEigenError
from .faults import FaultEvent, FaultSchedule, FaultState, apply_fault, generate_schedule
from .operators import ExplicitSystem, FaultAwareSystem, PlainSystem, reconstitute_explicit
from .power import PowerConfig, power_solve
from .recovery import RecoveredEigenpairs, detect_spurious, recover_eigenvectors
from .redundancy import (
    AugmentedPencil,
    RedundancyBlocks,
    assemble_augmented_pencil,
    compute_redundancy,
    verify_joint_nullspace,
    verify_pencil_equivalence,
)
from .results import EigenResult
from .tracemin import CGParams, TraceMinConfig, b_orthonormalize, cg_solve, tracemin_solve

__version__ = "0.1.0"
