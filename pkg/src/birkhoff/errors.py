"""Exception types shared across the package."""


class BirkhoffError(Exception):
    """Base class for all package-specific errors."""


class NotPrimitive(BirkhoffError):
    """The adjacency matrix has no strictly positive power."""


class CapExceeded(BirkhoffError):
    """An enumeration would produce more words than the caller allowed."""

    def __init__(self, count, cap):
        super().__init__(f"admissible word count {count} exceeds cap {cap}")
        self.count = count
        self.cap = cap


class LimitTooLarge(BirkhoffError):
    """A sieve allocation would exceed the configured budget."""


class SymbolExhausted(BirkhoffError):
    """A required symbol occurrence was not found within the scan horizon.

    Signals that the two weight streams do not have matching frequencies.
    """


class PrefixTooShort(BirkhoffError):
    """A supplied finite prefix is shorter than the operation requires."""

    def __init__(self, required, got):
        super().__init__(f"prefix of length >= {required} required, got {got}")
        self.required = required
        self.got = got


class DimensionMismatch(BirkhoffError):
    """Inconsistent shapes between frequencies, potential table and vectors."""


class MaxIterations(BirkhoffError):
    """The minimizer hit its iteration budget; carries the best iterate."""

    def __init__(self, message, p_best=None, eval_best=None):
        super().__init__(message)
        self.p_best = p_best
        self.eval_best = eval_best


class DegeneratePotential(BirkhoffError):
    """The shift-coordinate potential is constant, so no interval exists."""


class OutsideDomain(BirkhoffError):
    """The requested level lies outside the achievable interval."""


class BucketRangeOverflow(BirkhoffError):
    """The bucketed DP would need more buckets than the configured limit."""
