"""Exception hierarchy shared across the package."""


class RouteforgeError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(RouteforgeError):
    """An input's shape does not match what the operation requires."""


class NumericError(RouteforgeError):
    """A public operation produced (or received) a non-finite value."""


class StaleCacheError(RouteforgeError):
    """A forward cache was used with a model it was not produced by."""


class ConfigError(RouteforgeError):
    """Invalid or inconsistent run configuration."""


class DataError(RouteforgeError):
    """Semantically invalid data: duplicate ids, bad labels, bad values."""


class CoverageError(DataError):
    """Required ids are missing from a store, label map, or outcome matrix."""


class FormatError(RouteforgeError):
    """Base class for file-format violations."""


class BadMagicError(FormatError):
    """File does not start with the expected magic bytes."""


class VersionError(FormatError):
    """File declares a format version this reader does not support."""


class TruncatedFileError(FormatError):
    """File ends before the declared structure is complete."""


class ChecksumError(FormatError):
    """Payload bytes do not match the trailing CRC32."""


class ZeroDimError(FormatError):
    """Embedding store declares vector dimension 0."""


class TrainingAbortError(RouteforgeError):
    """Training hit a non-finite loss; the message carries epoch/batch context."""
