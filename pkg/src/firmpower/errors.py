"""Exception hierarchy shared across the package.

The command-line layer maps these onto process exit codes, so every
error raised by library code should derive from FirmpowerError and
carry a message that names the offending column, year, or firm.
"""


class FirmpowerError(Exception):
    """Base class for all package errors."""


class ConfigError(FirmpowerError):
    """Bad configuration file, preset name, or parameter value."""


class SchemaError(FirmpowerError):
    """Input file is missing required columns or has the wrong layout."""


class IntegrityError(FirmpowerError):
    """Input data violates a uniqueness or consistency requirement."""


class StateError(FirmpowerError):
    """Operation applied to a dataset in the wrong state."""


class DataError(FirmpowerError):
    """Runtime data problem: missing years, empty samples, bad values."""


class EstimationError(FirmpowerError):
    """Production-function estimation could not produce estimates."""


class VerificationError(FirmpowerError):
    """A post-run identity check failed."""
