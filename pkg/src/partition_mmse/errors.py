"""Exception hierarchy. Every failure raised by the library derives from PartitionError."""


class PartitionError(Exception):
    pass


class DimensionMismatch(PartitionError, ValueError):
    pass


class NonConvergent(PartitionError):
    """Sum or integral defining ln Z diverges (or cannot be bounded) at the requested tilt."""


class ZeroProbability(PartitionError):
    """The observation has zero probability, so ln Z = -inf and derivatives are undefined."""


class ZeroMarginal(ZeroProbability):
    pass


class StepTooLarge(PartitionError):
    """Richardson levels disagree by more than the configured tolerance."""


class StateSpaceTooLarge(PartitionError):
    pass


class CodebookTooLarge(StateSpaceTooLarge):
    pass


class FormulaDisagreement(PartitionError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class AlphabetMismatch(PartitionError, ValueError):
    pass


class DomainError(PartitionError, ValueError):
    pass


class RegimeError(PartitionError):
    pass


class QuadratureFailure(PartitionError):
    pass


class NoConvergence(PartitionError):
    pass


class InvalidTailExponent(DomainError):
    pass


class FlatMaximum(PartitionError):
    pass


class MultiModal(PartitionError):
    def __init__(self, message, maxima=()):
        super().__init__(message)
        self.maxima = tuple(maxima)


class SignCancellation(PartitionError):
    pass


class NegativeMmse(PartitionError):
    pass


class DegenerateWeights(PartitionError):
    pass


class ConfigError(PartitionError, ValueError):
    pass
