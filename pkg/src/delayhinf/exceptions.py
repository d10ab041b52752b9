"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Matrix or signal dimensions are mutually inconsistent."""


class FrequencyResponseError(RuntimeError):
    """The frequency response is undefined (characteristic root on the axis)."""


class LevelSingularityError(ValueError):
    """The requested level coincides with a feedthrough singular value.

    The sweep matrices require D_cl'D_cl - xi^2 I to be invertible; the caller
    should perturb the level slightly and retry.
    """


class UnstableSystemError(RuntimeError):
    """The closed loop is not exponentially stable, so the norm is undefined."""


class DiscretizationLimitError(RuntimeError):
    """The discretization cap was reached before results stabilized.

    Carries the best estimate computed so far in ``best``.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class StabilizationError(RuntimeError):
    """No stabilizing controller was found for the requested order.

    Carries the best (smallest) spectral abscissa reached in ``best_abscissa``.
    """

    def __init__(self, message, best_abscissa=None):
        super().__init__(message)
        self.best_abscissa = best_abscissa


class DefectiveRootError(RuntimeError):
    """Eigenvalue derivative is undefined at a defective characteristic root."""
