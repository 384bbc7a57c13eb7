"""
Custom exceptions.
"""

from typing import Optional


class ImmutablePropertyError(Exception):
    """
    Raise when a property is immutable because the setter does nothing.
    """

    def __init__(self, message):
        super().__init__(message)


class FrictionObserverError(Exception):
    """
    Base class for errors raised by the simulation toolkit.
    """


class NumericalBlowup(FrictionObserverError):
    """
    Raise when an integrated state component becomes non-finite, or leaves the configured
    divergence bound.

    Attributes:
        t (float): Simulation time of the failed step.
        component (str): Name of the offending state component.
        value (float): The offending value.
    """

    def __init__(self, t: float, component: str, value: float = float("nan")):
        self.t = t
        self.component = component
        self.value = value
        super().__init__(
            f"Numerical blowup at t={t:.6g}s in component '{component}' (value={value!r})"
        )


class CovarianceDegenerate(FrictionObserverError):
    """
    Raise when the adaptation covariance stops being symmetric positive-definite.

    Attributes:
        t (float): Simulation time at which the check failed.
        gamma (tuple): The offending matrix, row major.
    """

    def __init__(self, t: Optional[float], gamma):
        self.t = t
        self.gamma = tuple(tuple(float(v) for v in row) for row in gamma)
        when = "" if t is None else f" at t={t:.6g}s"
        super().__init__(f"Covariance is not positive-definite{when}: {self.gamma}")


class ConfigError(FrictionObserverError, ValueError):
    """
    Raise when a configuration value violates the schema or an invariant. The offending field
    is kept in `field` so callers can point the user at it.
    """

    def __init__(self, field: str, message: str = ""):
        self.field = field
        super().__init__(f"{field}: {message}" if message else field)


class InvalidInput(FrictionObserverError, ValueError):
    """
    Raise when a helper is called with arguments outside its domain.
    """


class OutputError(FrictionObserverError):
    """
    Raise when writing an output file fails. Carries the path.
    """

    def __init__(self, path, message: str):
        self.path = str(path)
        super().__init__(f"Could not write '{self.path}': {message}")
