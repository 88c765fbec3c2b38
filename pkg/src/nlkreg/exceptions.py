"""Exception and warning types shared across the package."""


class NlkregError(Exception):
    """Base class for all package-specific errors."""


class HorizonError(NlkregError, ValueError):
    """Horizon is incompatible with the grid (too large, or not resolvable)."""


class SolvabilityError(NlkregError, ValueError):
    """Forcing term violates a solvability condition of the target problem."""


class SingularPointError(NlkregError, ValueError):
    """Kernel evaluated at a singular point that the caller must exclude."""


class NotInvertibleError(NlkregError, RuntimeError):
    """Discrete operator is singular or indefinite beyond the deflated constant mode.

    Carries an estimate of the offending smallest eigenvalue when available.
    """

    def __init__(self, message, lambda_min=None):
        super().__init__(message)
        self.lambda_min = lambda_min


class DegenerateKernelError(NlkregError, RuntimeError):
    """First-stage kernel fails coercivity numerically (smallest eigenvalue ~ 0)."""


class DivergenceError(NlkregError, RuntimeError):
    """Optimizer produced a non-finite loss."""


class DatasetFormatError(NlkregError, ValueError):
    """Dataset directory is malformed, truncated, or fails its checksums."""


class ConfigError(NlkregError, ValueError):
    """Run configuration failed schema validation."""


class NonZeroMeanWarning(UserWarning):
    """Periodic right-hand side had a nonzero mean and was projected."""
