"""
Exception hierarchy for the lattice package.

Every error carries a machine-readable code and the process exit status the
command layer should return for it.
"""


class LatticeError(Exception):
    """Base error raised by the lattice package."""

    exit_status = 1

    def __init__(self, message: str, code: str = "LATTICE_ERROR"):
        self.message = message
        self.code = code
        super().__init__(f"[{code}] {message}")


class ParameterError(LatticeError):
    """A model parameter violates its invariant."""

    exit_status = 2


class ConfigError(LatticeError):
    """A configuration document could not be read or parsed."""

    exit_status = 2

    def __init__(self, message: str, code: str = "SCHEMA_ERROR"):
        super().__init__(message, code)


class StateSpaceError(LatticeError):
    """The state space is too large for the requested computation."""

    exit_status = 2

    def __init__(self, message: str, code: str = "STATE_SPACE_TOO_LARGE"):
        super().__init__(message, code)


class DimensionError(LatticeError):
    """A vector does not match the state space it is applied to."""

    exit_status = 2

    def __init__(self, message: str):
        super().__init__(message, "DIMENSION_MISMATCH")


class PreconditionError(LatticeError):
    """An identity check was requested outside the case it holds for."""

    exit_status = 2

    def __init__(self, message: str):
        super().__init__(message, "PRECONDITION_VIOLATED")


class NumericalError(LatticeError):
    """A solver failed, did not converge, or produced an out-of-tolerance result."""

    exit_status = 1

    def __init__(self, message: str, code: str = "NUMERICAL_ERROR", residual: float | None = None):
        self.residual = residual
        super().__init__(message, code)
