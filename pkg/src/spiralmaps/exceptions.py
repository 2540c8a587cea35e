class SpiralMapsError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ValidationError(SpiralMapsError, ValueError):
    """Input violates a documented precondition."""

    exit_code = 2


class ConvergenceError(SpiralMapsError, RuntimeError):
    """An iterative solver did not reach its tolerance within budget."""

    exit_code = 3


class ConstraintViolation(SpiralMapsError, ValueError):
    """A construction parameter set breaks one of the construction constraints."""

    exit_code = 4
