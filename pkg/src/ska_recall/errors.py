"""Exception types shared across the package."""


class SkaError(Exception):
    """Base class for all package errors."""


class InvalidConfig(SkaError, ValueError):
    pass


class NotPositiveDefinite(SkaError, ValueError):
    pass


class NonSquare(SkaError, ValueError):
    pass


class NonSymmetric(SkaError, ValueError):
    pass


class SingularDiagonal(SkaError, ValueError):
    pass


class DimensionMismatch(SkaError, ValueError):
    pass


class EmptyMask(SkaError, ValueError):
    pass


class IndexOutOfRange(SkaError, IndexError):
    pass


class OddDimension(SkaError, ValueError):
    pass


class RangeExhausted(SkaError, ValueError):
    pass


class TieUnresolvable(SkaError, RuntimeError):
    pass


class KeyCapacityExceeded(SkaError, ValueError):
    pass


class PerturbationTooLarge(SkaError, ValueError):
    pass


class EmptyDataset(SkaError, ValueError):
    pass


class ParseError(SkaError, ValueError):
    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
