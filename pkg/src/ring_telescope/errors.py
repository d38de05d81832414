"""Exception hierarchy shared by every layer of the package."""


class RingTelescopeError(Exception):
    """Base class for all library errors."""


class FactorDegreeExceeded(RingTelescopeError):
    pass


class NotAUnit(RingTelescopeError):
    pass


class NonExactDivision(RingTelescopeError):
    pass


class PoleEncountered(RingTelescopeError):
    def __init__(self, k, message=None):
        self.k = k
        super().__init__(message or f"pole or zero division encountered at k={k}")


class MissingParameter(RingTelescopeError):
    pass


class InvalidProduct(RingTelescopeError):
    pass


class NotRewritable(RingTelescopeError):
    pass


class SupportBoundExceeded(RingTelescopeError):
    pass


class SolverInvariantError(RingTelescopeError):
    """A computed solution failed its exact residual check (a bug, never expected)."""


class ParseError(RingTelescopeError):
    def __init__(self, message, position=None):
        self.position = position
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)


class ScopeError(RingTelescopeError):
    pass


class UnsupportedExpression(RingTelescopeError):
    pass


class NoRecurrenceFound(RingTelescopeError):
    def __init__(self, max_order):
        self.max_order = max_order
        super().__init__(f"no recurrence of order < {max_order} found (tried d=1..{max_order})")


class SingularLeadingCoefficient(RingTelescopeError):
    pass
