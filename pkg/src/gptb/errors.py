"""Exception hierarchy shared by every gptb module."""

from __future__ import annotations


class GPTBError(Exception):
    """Base class for all errors raised by gptb."""


class DomainError(GPTBError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class DegenerateCorrelationError(DomainError):
    """A correlation of absolute value one where a strict inequality is needed."""


class RepeatedVariableError(DegenerateCorrelationError):
    """Two distinct indices are perfectly (anti)correlated."""


class NotPositiveDefiniteError(GPTBError, ValueError):
    def __init__(self, pivot: int, value: float):
        self.pivot = pivot
        self.value = value
        super().__init__(
            f"matrix is not positive definite: pivot {pivot} (0-based) = {value:.3e}"
        )


class UnsupportedDimensionError(GPTBError, ValueError):
    """The exact oracle only supports dimensions up to 3."""


class ConfigurationError(GPTBError, ValueError):
    """Invalid or inconsistent bound configuration.

    ``report`` carries the validation report when the failure came from the
    (c, d) hypothesis check.
    """

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class HTooLargeError(ConfigurationError):
    """Some conditional threshold u - r(u+h) is negative."""


class BUndefinedError(ConfigurationError):
    """The Brownian-factor scale needs c_{m-1} > 0."""


class HypothesisError(GPTBError, ValueError):
    """A stated hypothesis of a theorem-level recipe is violated."""


class InstanceTooLargeError(GPTBError, ValueError):
    """Instance exceeds a configured size cap."""


class ResourceError(GPTBError, MemoryError):
    """Requested computation exceeds the configured memory budget."""


class EmptyRangeError(GPTBError, ValueError):
    """A prime range [y, x] contains no primes."""
