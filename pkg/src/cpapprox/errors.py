"""Exception types raised across the package."""


class CPApproxError(ValueError):
    """Base class for all package errors."""


class NonStochasticVector(CPApproxError):
    pass


class OutOfRangeOutput(CPApproxError):
    pass


class ParameterOutOfRange(CPApproxError):
    pass


class BudgetExceeded(CPApproxError):
    pass


class DimensionMismatch(CPApproxError):
    pass


class InvalidOrder(CPApproxError):
    pass


class NonVanishingImaginary(CPApproxError):
    pass


class NegativeRate(CPApproxError):
    pass


class AliasingNotConverged(CPApproxError):
    pass


class BoxOverflow(CPApproxError):
    pass


class InvalidHorizon(CPApproxError):
    pass


class ZeroMarginal(CPApproxError):
    pass


class HypothesisViolated(CPApproxError):
    pass
