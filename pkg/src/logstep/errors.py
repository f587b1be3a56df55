"""Exception hierarchy shared across the package."""


class LogstepError(Exception):
    pass


class DomainError(LogstepError, ValueError):
    """An argument lies outside the domain where a formula is defined."""


class InputError(LogstepError, ValueError):
    """Malformed input: wrong shape, non-finite value, length mismatch."""


class DegenerateDistributionError(LogstepError, ValueError):
    pass


class PreconditionError(LogstepError, ValueError):
    """A theoretical precondition (e.g. step size vs. smoothness) is violated."""


class DivergenceError(LogstepError, FloatingPointError):
    pass


class ConfigError(LogstepError, ValueError):
    pass


class SummaryError(LogstepError, ValueError):
    pass


class NoWinnerError(LogstepError, RuntimeError):
    pass


class IdxError(LogstepError, ValueError):
    pass


class IdxMagicError(IdxError):
    pass


class IdxTruncatedError(IdxError):
    pass


class IdxDimensionError(IdxError):
    pass
