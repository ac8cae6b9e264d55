"""Exception hierarchy shared across the package.

CLI exit codes: ConfigError -> 2, DataError (and subclasses) -> 3,
NumericError -> 4.
"""


class SmartError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigError(SmartError):
    """Invalid configuration: bad values, unknown keys, impossible dims."""

    exit_code = 2


class DataError(SmartError):
    """Problems with datasets on disk or their contents."""

    exit_code = 3


class DataFormatError(DataError):
    """Malformed sidecar, payload/shape mismatch, unknown format version."""


class ProtocolError(DataError):
    """Dataset does not cover what the requested split protocol needs."""


class VocabularyError(DataError):
    """Mask contains a class id outside the fixed element vocabulary."""


class EmptyRegionError(DataError):
    """A frame has no human pixels; generated data guarantees otherwise."""


class NumericError(SmartError):
    """Non-finite values where finite ones are required."""

    exit_code = 4
