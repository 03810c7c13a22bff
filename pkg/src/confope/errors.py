"""Exception types shared across the package."""


class ConfopeError(Exception):
    """Base class for all package errors."""


class ValidationError(ConfopeError, ValueError):
    """A constructed object violates a probability/shape invariant."""


class DimensionError(ConfopeError, ValueError):
    """Operands have incompatible shapes."""


class ParameterError(ConfopeError, ValueError):
    """A sensitivity or solver parameter is outside its legal range."""


class InfeasibleError(ConfopeError, RuntimeError):
    """A problem that should always admit a feasible point does not."""
