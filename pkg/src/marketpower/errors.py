"""Exception hierarchy shared by all pipeline stages."""


class MarketPowerError(Exception):
    """Base class for every error raised by this package."""

    exit_code = 2


class ValidationError(MarketPowerError, ValueError):
    """Input data violates a documented invariant."""

    exit_code = 1


class SchemaError(ValidationError):
    """A CSV file is missing required columns."""


class ParseError(ValidationError):
    """A cell could not be parsed; carries the offending row index."""

    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class AlignmentError(ValidationError):
    """Hourly timestamps are not contiguous."""

    def __init__(self, message, timestamp=None):
        super().__init__(message)
        self.timestamp = timestamp


class UnitReferenceError(ValidationError):
    """A unit id is referenced that does not exist in the unit list."""


class ConfigError(ValidationError):
    """Invalid configuration."""


class DomainError(MarketPowerError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class ShapeError(MarketPowerError, ValueError):
    """Arrays that must share an index do not."""


class InfeasibleError(MarketPowerError, ValueError):
    """Too little data for the requested model size."""


class SeparationError(MarketPowerError):
    """Logit likelihood has no finite maximiser (single class or separation)."""

    exit_code = 3


class StageError(MarketPowerError):
    """Wraps an error raised inside a named pipeline stage."""

    def __init__(self, stage, cause):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", 2)
