"""Exception hierarchy shared across the pipeline."""


class WearidError(Exception):
    """Base class for all package errors."""


class FormatError(WearidError):
    """A data file is missing, truncated, or malformed."""


class ConfigError(WearidError):
    """A configuration value is missing, unknown, or out of range."""


class MissingChannelError(WearidError):
    """A required sensor channel or derived signal is not available."""


class InsufficientDataError(WearidError):
    """Input too short (or too featureless) for the requested derivation."""


class PairSamplingError(WearidError):
    """Requested pair counts exceed what the window set can supply."""


class ExperimentError(WearidError):
    """An experiment cannot be run as configured."""
