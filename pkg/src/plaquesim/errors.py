"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid configuration value, unknown key, or violated invariant."""


class DomainError(ValueError):
    """A query point lies outside the computational domain."""


class InvertedElementError(RuntimeError):
    """A deformation map has non-positive Jacobian determinant.

    Signals mesh entanglement; ``cell`` is the offending cell id when the
    error was detected during assembly, else None.
    """

    def __init__(self, message, cell=None):
        super().__init__(message)
        self.cell = cell


class NonconvergenceError(RuntimeError):
    """Newton (or its continuation wrapper) failed to converge.

    ``residual_history`` holds the residual norms of the failed solve.
    """

    def __init__(self, message, residual_history=None):
        super().__init__(message)
        self.residual_history = list(residual_history or [])


class PeriodicityError(RuntimeError):
    """Short-scale cycling failed to reach a periodic state.

    ``gamma_history`` holds the per-cycle averaged growth rates (1/day).
    """

    def __init__(self, message, gamma_history=None):
        super().__init__(message)
        self.gamma_history = list(gamma_history or [])
