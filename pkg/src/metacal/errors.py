"""Exception hierarchy shared by all metacal modules."""


class MetacalError(Exception):
    """Base class for every error raised by metacal."""


class DegenerateConfigurationError(MetacalError):
    """The forward model produced a non-physical state (e.g. negative depth)."""

    def __init__(self, message: str, time: float | None = None):
        super().__init__(message)
        self.time = time


class AlignmentError(MetacalError, ValueError):
    """Two time series cannot be compared point by point."""


class DegenerateMetricError(MetacalError, ValueError):
    """A metric is undefined for the given inputs."""


class InvalidInputError(MetacalError, ValueError):
    pass


class IllPosedDesignError(MetacalError, ValueError):
    """The training design cannot support a surrogate (duplicates, too few rows)."""


class ConditioningError(MetacalError):
    """Correlation matrix stayed non positive definite after jitter escalation."""


class EvaluationError(MetacalError):
    """An objective or design evaluation failed; ``index`` locates the failure."""

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


class ConfigurationError(MetacalError, ValueError):
    pass


class IntegrityError(MetacalError):
    """A persisted artifact does not match its recorded checksum or schema."""


class StageError(MetacalError):
    """A workflow stage was requested before its prerequisites were met."""
