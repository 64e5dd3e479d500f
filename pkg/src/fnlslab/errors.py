"""Exception types shared across the package."""


class InvalidParameterError(ValueError):
    """An argument violates a documented precondition."""


class UnsupportedRegimeError(ValueError):
    """Parameters lie outside the regime where the operation is defined
    (for example a dispersion exponent at or below 1/2)."""


class UndefinedRatioError(ValueError):
    """A ratio statistic was requested for an input on which it is 0/0."""


class ResonantQuadError(ValueError):
    """A frequency quadruple with vanishing phase was passed where a
    nonresonant one is required."""


class UnsupportedDimensionError(ValueError):
    """The request needs a phase-space dimension beyond what the dense
    finite-difference machinery supports."""


class DegenerateEstimatorError(RuntimeError):
    """A Monte-Carlo estimator received no usable samples (empty ensemble,
    all-zero weights, or an empty target region)."""


class BlowupError(RuntimeError):
    """Time integration produced a non-finite or absurdly large state.

    Attributes:
        time: simulation time at which the state was rejected.
    """

    def __init__(self, time: float, message: str | None = None):
        self.time = float(time)
        super().__init__(message or f"state blew up at t={time:.6g}")
