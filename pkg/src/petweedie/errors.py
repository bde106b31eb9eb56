"""Exception hierarchy shared by all modules."""


class PetweedieError(Exception):
    """Base class for library errors."""


class DomainError(PetweedieError, ValueError):
    """Parameters or inputs outside the supported domain."""


class ConvergenceError(PetweedieError, RuntimeError):
    """An iterative procedure exhausted its budget.

    Attributes
    ----------
    attempts : int
        Number of iterations or proposals consumed before giving up.
    """

    def __init__(self, message, attempts=0):
        super().__init__(message)
        self.attempts = attempts


class EvaluationError(PetweedieError, ArithmeticError):
    """A series or quadrature failed to reach its tolerance."""

    def __init__(self, message, partial=None, bound=None):
        super().__init__(message)
        self.partial = partial
        self.bound = bound


class TailUnderflowError(EvaluationError):
    """Probability too small to form a stable ratio."""


class RankDeficiencyError(PetweedieError, ArithmeticError):
    """A sensitivity or design matrix is (numerically) singular."""

    def __init__(self, message, block=None):
        super().__init__(message)
        self.block = block


class ParseError(PetweedieError, ValueError):
    """Malformed input file; carries 1-based row and column coordinates."""

    def __init__(self, message, row=None, column=None):
        loc = []
        if row is not None:
            loc.append(f"row {row}")
        if column is not None:
            loc.append(f"column {column!r}")
        if loc:
            message = f"{message} ({', '.join(loc)})"
        super().__init__(message)
        self.row = row
        self.column = column
