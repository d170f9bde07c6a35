"""Exception hierarchy shared across the package."""


class ToricNQSError(Exception):
    pass


class InvalidArgument(ToricNQSError, ValueError):
    pass


class NumericalDomainError(ToricNQSError, ArithmeticError):
    """A log-amplitude or intermediate activation became NaN/+inf."""


class CapacityError(ToricNQSError, MemoryError):
    pass


class UndefinedRatioError(ToricNQSError, ArithmeticError):
    """BFFM denominator is statistically indistinguishable from zero."""

    def __init__(self, message, numerator=None, denominator=None):
        super().__init__(message)
        self.numerator = numerator
        self.denominator = denominator


class UndefinedEntropyError(ToricNQSError, ArithmeticError):
    def __init__(self, message, swap=None):
        super().__init__(message)
        self.swap = swap


class BoundaryPeakError(ToricNQSError, ValueError):
    pass


class SRSolveError(ToricNQSError, ArithmeticError):
    def __init__(self, message, singular_range=None):
        super().__init__(message)
        self.singular_range = singular_range


class NumericalAbort(ToricNQSError, RuntimeError):
    """Training aborted after repeated non-finite energies."""

    def __init__(self, message, checkpoint=None):
        super().__init__(message)
        self.checkpoint = checkpoint
