"""Exception types shared across the package."""


class SimCascadeError(Exception):
    """Base class for all simcascade errors."""


class ParseError(SimCascadeError):
    """Malformed text input; carries the 1-based line number when known."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SchemaError(SimCascadeError):
    """Structurally invalid block or config data; names the offending field."""

    def __init__(self, message, field=None):
        self.field = field
        if field is not None:
            message = f"{field}: {message}"
        super().__init__(message)


class ConfigError(SimCascadeError):
    """Invalid run configuration (CLI exit code 2)."""


class NumericalError(SimCascadeError):
    """Ill-conditioned system or non-finite numerical state (CLI exit code 3)."""


class DegenerateOutputError(NumericalError):
    """The stack output is identically zero, so the scaling factor is undefined."""


class UndefinedMetricError(SimCascadeError):
    """Metric is undefined for the given input (e.g. an all-zero matrix)."""
