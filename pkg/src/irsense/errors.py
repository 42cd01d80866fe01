"""Exception types raised by the library."""


class IrsenseError(Exception):
    """Base class for all library errors."""


class ParameterError(IrsenseError, ValueError):
    """An argument violates a documented precondition."""


class DegenerateInputError(IrsenseError, ValueError):
    """The input carries no signal (all-zero tensor or matrix)."""
