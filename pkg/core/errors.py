# errors.py
# Exception hierarchy shared by every package, plus the CLI exit codes they map to.

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_TRIAL_FAILURES = 3


class DissipateError(Exception):
    """Base class for every error raised on purpose by this project."""

    exit_code = EXIT_VALIDATION


class ValidationError(DissipateError, ValueError):
    """Input data violates a documented invariant."""


class ConfigError(ValidationError):
    """Run configuration is unusable."""


class NoCompleteCycleError(ValidationError):
    pass


class DegenerateCycleError(ValidationError):
    pass


class RankDeficientError(ValidationError):
    def __init__(self, message: str, dependent_columns: list[str]):
        super().__init__(message)
        self.dependent_columns = dependent_columns


class MetricError(ValidationError):
    pass


class ConvergenceError(DissipateError, RuntimeError):
    def __init__(self, message: str, trace: dict | None = None):
        super().__init__(message)
        self.trace = trace or {}


class FactorizationError(DissipateError, RuntimeError):
    pass


class TrialFailureError(DissipateError, RuntimeError):
    exit_code = EXIT_TRIAL_FAILURES

    def __init__(self, message: str, failures: list):
        super().__init__(message)
        self.failures = failures
