"""Exception hierarchy shared by the solvers and the CLI."""


class ECEigenError(Exception):
    """Base class for all library errors."""

    exit_code = 3


class InvalidDimensionsError(ECEigenError, ValueError):
    exit_code = 2


class DimensionMismatchError(ECEigenError, ValueError):
    exit_code = 2


class AsymmetricInputError(ECEigenError, ValueError):
    exit_code = 2


class MatrixParseError(ECEigenError, ValueError):
    exit_code = 2

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ConfigError(ECEigenError, ValueError):
    exit_code = 2


class CapacityExceededError(ECEigenError):
    """Raised when more rows are erased than the coding matrix can absorb."""

    exit_code = 4

    def __init__(self, requested, capacity):
        super().__init__(
            f"fault capacity was exceeded: {requested} erased rows, capacity k={capacity}"
        )
        self.requested = requested
        self.capacity = capacity


class DuplicateFaultError(ECEigenError, ValueError):
    pass


class NoFaultsError(ECEigenError, ValueError):
    pass


class SingularCodingError(ECEigenError):
    """E restricted to the faulty rows is rank deficient; the erasure is unrecoverable."""


class InconsistentFaultStateError(ECEigenError):
    pass


class CGBreakdownError(ECEigenError):
    pass


class RankDeficientBlockError(ECEigenError):
    pass


class IncompatibleResultsError(ECEigenError, ValueError):
    exit_code = 2
