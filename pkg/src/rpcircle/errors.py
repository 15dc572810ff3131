"""Exception hierarchy shared by all modules."""


class RPCircleError(Exception):
    """Base class for every error raised by this package."""


class DegenerateSymbol(RPCircleError):
    pass


class NotPrincipalType(RPCircleError):
    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class NotCharacteristic(RPCircleError):
    pass


class OrderOverflow(RPCircleError):
    pass


class UnsupportedOrder(RPCircleError):
    pass


class UnsupportedInput(RPCircleError):
    pass


class PreconditionError(RPCircleError):
    pass


class StiffnessError(RPCircleError):
    def __init__(self, message, last_state=None):
        super().__init__(message)
        self.last_state = last_state


class SeparationError(RPCircleError):
    def __init__(self, message, pair=None):
        super().__init__(message)
        self.pair = pair


class EstimateFailure(RPCircleError):
    def __init__(self, message, location=None):
        super().__init__(message)
        self.location = location


class KappaError(RPCircleError):
    pass


class OrderViolation(RPCircleError):
    pass


class ResolutionError(RPCircleError):
    pass


class InconclusiveFit(RPCircleError):
    pass


class RecurrenceBreakdown(RPCircleError):
    pass
