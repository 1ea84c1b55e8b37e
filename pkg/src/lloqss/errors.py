"""Exception hierarchy shared by all modules."""


class LLOQSSError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgumentError(LLOQSSError, ValueError):
    """An argument is outside the domain of the operation."""


class DegenerateDataError(LLOQSSError, ValueError):
    """Collected data cannot support the requested estimate."""


class IndeterminateAngleError(DegenerateDataError):
    """Both correlations are below the sampling-noise floor."""


class NumericalDomainError(LLOQSSError, ArithmeticError):
    """A quantity left its physical domain by more than rounding error."""


class NoPositiveRateError(LLOQSSError):
    """No positive secret key rate exists where one was required."""


class ConfigError(LLOQSSError, ValueError):
    """An experiment configuration failed validation."""
