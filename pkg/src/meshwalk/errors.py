"""Shared exception types mapped to CLI exit codes."""


class ConfigError(ValueError):
    """Bad configuration file, key, or flag value (exit code 1)."""


class DataError(ValueError):
    """Unusable dataset, manifest, or label data (exit code 2)."""


class NumericalError(ArithmeticError):
    """Non-finite value produced during a forward/backward pass (exit code 3)."""
