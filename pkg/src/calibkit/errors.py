"""Exception types shared across the toolkit."""


class DomainError(ValueError):
    """Invalid input to a toolkit operation (bad shapes, ranges, empty data).

    The CLI maps any DomainError to exit code 1; everything else is a bug.
    """


class PredictionLogError(DomainError):
    """Problem ingesting an external prediction log file."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class MissingLogError(PredictionLogError):
    """The prediction log file does not exist."""


class MalformedRowError(PredictionLogError):
    """A row could not be parsed into K probabilities plus a label."""


class ProbabilitySumError(PredictionLogError):
    """A row's probabilities deviate from sum 1 beyond the repair tolerance."""


class LabelRangeError(PredictionLogError):
    """A row's label is outside [0, K)."""
