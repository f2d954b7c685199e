"""Exception types shared across the package.

The CLI maps these onto stable exit codes: ConfigError -> 2,
I/O failures (OSError) -> 3, NumericError -> 4.
"""


class DimensionError(ValueError):
    """Operand shapes are incompatible for the requested operation."""


class ConfigError(ValueError):
    """A configuration value or file violates its contract."""


class NumericError(RuntimeError):
    """A numeric invariant broke at runtime (NaN loss, NaN logits, ...)."""
