"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid experiment configuration; ``key`` names the offending entry."""

    def __init__(self, message, key=None):
        super().__init__(message if key is None else f"{key}: {message}")
        self.key = key


class NumericalError(RuntimeError):
    """A numerical stage failed; ``seed`` identifies the realization for replay."""

    def __init__(self, message, seed=None):
        super().__init__(message if seed is None else f"{message} (seed={seed})")
        self.seed = seed


class SamplingError(NumericalError):
    """Rejection sampling could not honour the minimum separation."""


class GridResolutionError(NumericalError):
    """Angular quadrature did not converge under grid refinement."""
