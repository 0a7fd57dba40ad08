"""Exception hierarchy shared by all modules."""


class PolylapError(Exception):
    """Base class for all library errors."""


class ExprSyntaxError(PolylapError, ValueError):
    """Malformed expression text; ``offset`` is the 0-based character position."""

    def __init__(self, message, offset):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UnknownIdentifierError(PolylapError, ValueError):
    pass


class VariableIndexError(PolylapError, ValueError):
    pass


class NonDifferentiableError(PolylapError, ValueError):
    pass


class PreconditionError(PolylapError, ValueError):
    """A documented precondition of an operation does not hold."""


class GrowthError(PreconditionError):
    """The weighted tail integral of the field diverges at the requested order."""


class MismatchedGridError(PreconditionError):
    pass


class OffGridError(PreconditionError):
    pass


class QuadratureError(PolylapError, RuntimeError):
    """Quadrature produced non-finite values or failed a refinement check."""


class SolverError(PolylapError, RuntimeError):
    """The minimax linear program did not converge; ``best`` holds the incumbent."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best
