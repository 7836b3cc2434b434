"""Exception types shared across the package."""


class TypopredictError(Exception):
    """Base class for all errors raised by this package."""


class DataFormatError(TypopredictError):
    """A file could not be parsed; the message names the offending line."""


class DataValidationError(TypopredictError):
    """Parsed or constructed data violates an invariant."""


class UnknownFeatureError(TypopredictError, KeyError):
    """A feature, value or id was requested that the fitted model has never seen."""


class PredictionError(TypopredictError):
    """No prediction could be produced for a cell."""


class TrainingDivergedError(TypopredictError):
    """Optimization produced a non-finite loss."""


class ConfigError(TypopredictError):
    """A configuration file is malformed."""
