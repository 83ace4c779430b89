"""
error hierarchy for the summarizer.

every error carries the process exit code the command line maps it to,
the same way HTTP errors carry a status code.
"""


class ExitCode:
    """process exit codes used by the command line."""

    OK = 0
    VALIDATION = 1
    NUMERICAL = 2
    STORAGE = 3


class SummarizerError(Exception):
    """base class for all errors raised by dtrsum."""

    exit_code = ExitCode.VALIDATION

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


class ValidationError(SummarizerError, ValueError):
    """invalid input, configuration or shape."""

    exit_code = ExitCode.VALIDATION


class ShapeError(ValidationError):
    """tensor shapes do not agree for an operation."""


class AnnotationError(ValidationError):
    """annotation document is malformed or inconsistent."""


class ManifestError(ValidationError):
    """dataset manifest is malformed or inconsistent with its files."""


class HyperparameterMismatchError(ValidationError):
    """checkpoint hyperparameters differ from the requested model."""


class NumericalError(SummarizerError, ArithmeticError):
    """numerical failure during a forward or backward pass."""

    exit_code = ExitCode.NUMERICAL


class NonFiniteError(NumericalError):
    """an operation produced NaN or Inf."""

    def __init__(self, op: str, detail: str = ""):
        message = f"non-finite values produced by op '{op}'"
        if detail:
            message = f"{message}: {detail}"
        super().__init__(message)
        self.op = op


class MissingGradientError(NumericalError):
    """an optimizer step was requested for a parameter without a gradient."""


class NonDeterministicGraphError(NumericalError):
    """a gradient check was requested on a graph whose output is not reproducible."""


class GradientCheckError(NumericalError):
    """analytic and numeric gradients disagree."""


class StorageError(SummarizerError, OSError):
    """file could not be read, written or decoded."""

    exit_code = ExitCode.STORAGE


class FeatureFormatError(StorageError):
    """feature file does not follow the DTRF layout."""


class BadMagicError(FeatureFormatError):
    pass


class VersionMismatchError(FeatureFormatError):
    pass


class TruncatedPayloadError(FeatureFormatError):
    pass


class CheckpointError(StorageError):
    """checkpoint container is malformed or inconsistent with the model."""
