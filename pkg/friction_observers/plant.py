"""
The true one degree of freedom mechanical system with viscous and smoothed Coulomb friction:

    x1' = x2
    x2' = -theta1 * x2 - theta2 * tanh(vartheta * x2) + u

The motor inertia is lumped into u and the coefficients, so there is no separate inertia
parameter. No saturation is imposed on the state or the input.
"""

import math
from dataclasses import dataclass
from typing import NamedTuple

from friction_observers import kernels
from friction_observers.exception import ConfigError


@dataclass(frozen=True)
class PlantParams:
    """
    True plant constants.

    Attributes:
        theta1 (float): Viscous friction coefficient, > 0.
        theta2 (float): Coulomb friction magnitude, > 0.
        vartheta (float): Steepness of the smoothed relay, > 0.
    """

    theta1: float = 0.4
    theta2: float = 1.0
    vartheta: float = 100.0

    def __post_init__(self):
        for name in ("theta1", "theta2", "vartheta"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ConfigError(f"plant.{name}", "must be finite and strictly positive")

    @property
    def theta(self):
        """The unknown parameter vector (theta1, theta2)."""
        return self.theta1, self.theta2


class PlantState(NamedTuple):
    """Generalized position and velocity. Also used for their time derivatives."""

    x1: float
    x2: float


def friction_force(x2: float, p: PlantParams) -> float:
    """
    The friction magnitude subtracted in the velocity equation, theta1*x2 + theta2*tanh(vartheta*x2).
    Odd and strictly increasing in x2.

    Args:
        x2 (float): Velocity.
        p (PlantParams): Plant constants.

    Returns:
        float: Friction force.
    """
    return kernels.friction(float(x2), float(p.theta1), float(p.theta2), float(p.vartheta))


def plant_deriv(s: PlantState, u: float, p: PlantParams) -> PlantState:
    """
    Time derivative of the plant state.

    Args:
        s (PlantState): Current state.
        u (float): Control force.
        p (PlantParams): Plant constants.

    Returns:
        PlantState: (x1', x2').
    """
    return PlantState(s.x2, -friction_force(s.x2, p) + u)
