"""Exception types shared across the package."""


class CQPError(Exception):
    """Base class for all package errors."""


class DuplicateName(CQPError):
    pass


class UnknownName(CQPError):
    pass


class NotNormalized(CQPError):
    pass


class NotUnitary(CQPError):
    pass


class InvalidPermutation(CQPError):
    pass


class WeightMismatch(CQPError):
    pass


class LayoutMismatch(CQPError):
    pass


class NotAMode(CQPError):
    pass


class NotAQubit(CQPError):
    pass


class DomainError(CQPError):
    """A dual-rail gate was applied outside the single-photon subspace."""


class PostSelectionEmpty(CQPError):
    """No amplitude survives a post-selected measurement."""


class OwnershipFault(CQPError):
    """A process acted on a quantum name it does not own."""


class StuckExpression(CQPError):
    """An expression cannot be reduced to a value."""


class LimitExceeded(CQPError):
    """State-space exploration went over a configured bound."""


class ContextError(CQPError):
    """A context places its hole where congruence is not expected to hold."""


class CQPSyntaxError(SyntaxError):
    """Parse failure with a 1-based line and column."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} at line {line}, column {column}")
        self.message = message
        self.line = line
        self.column = column
