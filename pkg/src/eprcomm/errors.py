"""Exception types shared across the package."""


class EprCommError(Exception):
    """Base class for all errors raised by eprcomm."""


class InvalidArgument(EprCommError, ValueError):
    """An argument is outside its documented domain."""


class UnphysicalState(EprCommError, ValueError):
    """A covariance matrix violates the uncertainty principle."""


class AboveThreshold(InvalidArgument):
    """The parametric amplifier was asked to operate at or above threshold."""


class SnrUndefined(EprCommError):
    """The frame pattern does not provide both message-on and message-off frames."""


class Infeasible(EprCommError):
    """A requested target cannot be reached within the allowed parameter range."""


class ConfigError(EprCommError):
    """A scenario configuration is malformed or incomplete."""
