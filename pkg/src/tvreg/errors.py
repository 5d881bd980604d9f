"""Exception types with machine-readable categories.

Every error raised on purpose by this package derives from :class:`TvregError`
and carries a ``category`` string; the CLI maps categories to exit codes so
callers can dispatch on failures without parsing messages.
"""


class TvregError(Exception):
    category = "internal-error"


class DimensionError(TvregError, ValueError):
    """Operand shapes or lengths do not agree."""

    category = "dimension-error"


class DomainError(TvregError, ValueError):
    """A numeric argument lies outside the mathematical domain of the operation."""

    category = "domain-error"


class FactorizationError(TvregError, ArithmeticError):
    """A matrix factorization broke down (non positive definite input)."""

    category = "factorization-error"


class TaskMismatchError(TvregError, TypeError):
    """Responses of the wrong kind for the requested likelihood."""

    category = "type-error"


class ConfigError(TvregError, ValueError):
    """Inconsistent or incomplete run configuration."""

    category = "config-error"


class InputError(TvregError, ValueError):
    """Unusable input data (empty window, invalid generator spec, ...)."""

    category = "input-error"


class ParseError(TvregError, ValueError):
    """A data file could not be parsed; message names the offending line."""

    category = "parse-error"


class ValidationError(TvregError, ValueError):
    """A parsed record violates the dataset contract (index ranges etc.)."""

    category = "validation-error"


class FeatureLookupError(TvregError, KeyError):
    """A feature selection referenced an unknown feature name."""

    category = "lookup-error"


EXIT_CODES = {
    "dimension-error": 2,
    "type-error": 2,
    "input-error": 2,
    "parse-error": 2,
    "validation-error": 2,
    "lookup-error": 2,
    "config-error": 3,
    "domain-error": 4,
    "factorization-error": 4,
    "internal-error": 1,
}
