"""Exception types shared across the package."""


class DegenerateInputError(ValueError):
    """Input is structurally valid but carries no usable signal."""


class PowerIterationError(RuntimeError):
    """Power iteration failed to reach the requested residual.

    The last relative eigen-residual is available as ``residual``.
    """

    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = float(residual)


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""
