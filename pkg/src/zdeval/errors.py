"""Exception types shared across the package.

Exit-code mapping used by the CLI: ConfigError -> 1, SchemaError and
DataError -> 2, anything else -> 3.
"""


class ZdevalError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(ZdevalError):
    """Invalid or inconsistent experiment configuration."""


class SchemaError(ZdevalError):
    """Dataset file does not match the declared column schema."""


class DataError(ZdevalError):
    """Dataset content is invalid (bad cells, label inconsistencies, empty file)."""
