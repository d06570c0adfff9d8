"""Exception hierarchy shared by every spinlab module."""


class SpinLabError(Exception):
    """Base class for all spinlab errors."""


class DomainError(SpinLabError, ValueError):
    """An argument lies outside the domain of the operation."""


class InvalidDirectionError(DomainError):
    """A vector cannot serve as a unit direction on the sphere."""


class UnsupportedModelError(SpinLabError):
    """The requested operation has no implementation for this model."""


class CounterfactualUnsupportedError(UnsupportedModelError):
    """The model cannot be evaluated at several settings on one draw."""


class UnsupportedConfigurationError(SpinLabError, ValueError):
    """The analyzer configuration is incompatible with the requested mode."""


class DegenerateRunError(SpinLabError):
    """A run produced no coincidences, so no correlation can be estimated."""

    def __init__(self, message: str, coincidences: int = 0, total_pairs: int = 0):
        super().__init__(message)
        self.coincidences = coincidences
        self.total_pairs = total_pairs


class DegenerateEstimateError(SpinLabError, ValueError):
    """An estimate has zero standard error where a positive one is needed."""


class ConfigError(SpinLabError, ValueError):
    """An experiment file or command line is malformed."""
