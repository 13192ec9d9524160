"""Exception hierarchy shared across the package.

Every error maps to one CLI exit code (see cli.py): config/parse/format
problems exit 2, numerical failures exit 3, backend failures exit 4.
"""


class ProxyClustError(Exception):
    """Base class for all package errors."""


class NormalizationError(ProxyClustError):
    """A vector with zero norm cannot be normalized."""


class DimensionError(ProxyClustError):
    """Operands have incompatible dimensions or lengths."""


class UnknownTokenError(ProxyClustError):
    """A word is not present in the token table vocabulary."""


class ConfigError(ProxyClustError):
    """Invalid configuration, precondition, or input structure."""


class ParseError(ConfigError):
    """A structured input file failed to parse; message carries diagnostics."""


class FormatError(ProxyClustError):
    """A binary file does not match the expected format."""


class IoError(ProxyClustError):
    """An output path could not be written."""


class NumericalError(ProxyClustError):
    """A computation produced non-finite values or diverged."""


class BackendUnavailableError(ProxyClustError):
    """A remote encoder backend could not be reached or answered badly."""


class TheoremViolation(ProxyClustError):
    """An admissible family violated the discrete-reference bound."""
