"""Exception hierarchy shared by all homscope modules."""


class HomscopeError(Exception):
    """Base class for every error raised by homscope."""


class ParameterError(HomscopeError, ValueError):
    """A model or configuration parameter is outside its valid domain."""


class NonIdentifiableError(HomscopeError):
    """The likelihood carries no information about the delay."""


class AmbiguityError(HomscopeError):
    """The search window holds several fringe branches and no hint was given.

    ``candidates`` lists ``(delay_s, log_likelihood)`` of the competing optima.
    """

    def __init__(self, message, candidates=()):
        super().__init__(message)
        self.candidates = list(candidates)


class InsufficientDataError(HomscopeError):
    """Too few samples for the requested statistic."""


class CalibrationError(HomscopeError):
    """Calibration cannot proceed, e.g. a channel recorded zero singles.

    ``channel`` is the 1-based detector label when one is to blame.
    """

    def __init__(self, message, channel=None):
        super().__init__(message)
        self.channel = channel


class PlanningError(HomscopeError):
    """The requested precision is out of reach with the configured budget."""

    def __init__(self, message, best_sigma_m=None):
        super().__init__(message)
        self.best_sigma_m = best_sigma_m
