"""Exception hierarchy shared by all solver modules."""


class RDODEError(Exception):
    """Base class for every error raised by this package."""


class InvalidParams(RDODEError, ValueError):
    pass


class DimensionMismatch(RDODEError, ValueError):
    pass


class NegativeTime(RDODEError, ValueError):
    pass


class NoConvergence(RDODEError):
    pass


class SingularJacobian(RDODEError):
    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class NoSolution(RDODEError):
    pass


class EventNotCrossed(RDODEError):
    pass


class BranchUndefined(RDODEError, ValueError):
    pass


class EigensolveFailure(RDODEError):
    pass


class ResolventSingular(RDODEError, ValueError):
    pass


class UnsupportedShape(RDODEError, ValueError):
    pass


class BlowUp(RDODEError):
    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class Divergence(RDODEError):
    pass


class InsufficientData(RDODEError, ValueError):
    pass


class NonPositiveNorms(RDODEError, ValueError):
    pass


class ConfigError(RDODEError, ValueError):
    pass


class OperatorTooLarge(RDODEError, ValueError):
    pass
