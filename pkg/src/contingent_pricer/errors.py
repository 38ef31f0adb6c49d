"""Exception hierarchy shared by all pricing modules."""


class PricingError(ValueError):
    """Base class for every error raised by this package."""


class NonFiniteInput(PricingError):
    pass


class DimensionMismatch(PricingError):
    pass


class DegenerateDichotomy(PricingError):
    """The LP stopped at a point that is within tolerance of both Farkas branches."""


class ArbitrageExists(PricingError):
    pass


class NotNormalizable(PricingError):
    pass


class MarketFormatError(PricingError):
    """Malformed payoff-matrix CSV; ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class TreeStructureError(PricingError):
    pass


class NegativeSdf(PricingError):
    pass


class UnknownNode(PricingError, KeyError):
    def __str__(self) -> str:
        return ValueError.__str__(self)


class MissingTerminalPrices(PricingError):
    pass


class ZeroKernel(PricingError):
    pass


class DeadCohort(PricingError):
    pass


class StepTooLarge(PricingError):
    pass


class ZeroAnnuity(PricingError):
    pass
