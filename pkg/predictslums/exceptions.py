"""
Error hierarchy for the predictslums app.

Each error carries the exit code the management commands return for it:
2 for configuration errors, 3 for data errors, 4 for numerical failures.
"""


class PredictSlumsError(Exception):
    exit_code = 1


class ConfigError(PredictSlumsError, ValueError):
    """Invalid argument, flag or configuration value."""
    exit_code = 2


class DataError(PredictSlumsError):
    """Input data is malformed or unusable."""
    exit_code = 3


class ParseError(DataError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f'line {line}: {message}'
        super().__init__(message)


class LabelError(DataError):
    pass


class DegreeCoordinatesError(DataError):
    pass


class ModelFormatError(DataError):
    pass


class ModelVersionError(ModelFormatError):
    def __init__(self, found, supported):
        self.found = found
        self.supported = supported
        super().__init__(
            f'model file format version {found} is not supported '
            f'(this build reads version {supported})'
        )


class ModelTruncatedError(ModelFormatError):
    pass


class ModelChecksumError(ModelFormatError):
    pass


class NumericalError(PredictSlumsError):
    exit_code = 4


class DegenerateDataError(NumericalError):
    """Zero variance, single class, or too few distinct values."""


class SingularHessianError(NumericalError):
    pass


class SeparationError(NumericalError):
    pass


class StageError(PredictSlumsError):
    """
    A pipeline stage failed. Keeps the exit code of the underlying cause.
    """

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        self.exit_code = getattr(cause, 'exit_code', 1)
        super().__init__(f'stage "{stage}" failed: {cause}')
