"""Exception types raised across quantlab."""


class QuantLabError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(QuantLabError, ValueError):
    """Invalid configuration value; ``key`` names the offending entry."""

    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}")


class IllConditionedBasis(QuantLabError, ValueError):
    pass


class DegenerateAtOrigin(QuantLabError, ValueError):
    pass


class DegenerateGradient(QuantLabError, ValueError):
    pass


class HypothesisViolation(QuantLabError):
    """A norm fails the strict convexity gate.

    ``witness`` holds the pair of level-set points whose midpoint is not
    strictly inside the unit ball.
    """

    def __init__(self, message, witness=None):
        self.witness = witness
        super().__init__(message)


class MaxIterations(QuantLabError, RuntimeError):
    pass


class Degenerate(QuantLabError):
    """An active coordinate carries a vanishing objective gradient."""


class FastPathUnavailable(QuantLabError, ValueError):
    pass


class AmbiguousFace(QuantLabError):
    pass


class InconsistentCode(QuantLabError, ValueError):
    pass


class DimensionTooLarge(QuantLabError, ValueError):
    pass


class EnumerationBudgetExceeded(QuantLabError):
    def __init__(self, message, suggested_tau=None):
        self.suggested_tau = suggested_tau
        super().__init__(message)


class AcceptanceTooLow(QuantLabError):
    pass


class InsufficientData(QuantLabError):
    pass
