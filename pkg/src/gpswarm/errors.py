"""Exception types shared across the package."""


class GpswarmError(Exception):
    """Base class for all package errors."""


class BasisError(GpswarmError):
    """Eigenbasis construction could not satisfy the requested rank."""


class ConditioningError(GpswarmError):
    """A linear system that should be positive definite failed to factor."""


class PlacementError(GpswarmError):
    """Entity placement ran out of rejection-sampling attempts."""


class ConfigError(GpswarmError):
    """Invalid or unparsable configuration."""


class EpisodeDone(GpswarmError):
    """step() was called on an episode that already finished."""


class ProtocolError(GpswarmError):
    """Malformed or out-of-order wire message."""
