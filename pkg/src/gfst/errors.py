"""Exception types shared across the package. The CLI maps them to exit codes."""


class ValidationError(ValueError):
    """Bad input data or arguments (exit code 1)."""


class ConfigError(ValueError):
    """Inconsistent configuration (exit code 1)."""


class DimensionError(ValueError):
    """Tensor shapes that cannot be combined."""


class NumericalError(RuntimeError):
    """Divergence or failed gradient check (exit code 2)."""
