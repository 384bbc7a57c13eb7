"""
Tracking control laws.

With e1 = x1 - r and e2 = x2 - rdot, the ideal full-information law

    u* = theta1*x2 + theta2*tanh(vartheta*x2) + rddot - alpha1*e1 - alpha2*(x2 - rdot)

cancels the friction exactly and leaves e1'' + alpha2*e1' + alpha1*e1 = 0. The certainty
equivalence law replaces x2 and theta by the observer estimates and is shared by both observer
schemes. `epsilon_t` reports the resulting perturbation twice: once by its closed-form
expression and once as the residual e2' + alpha1*e1 + alpha2*e2 of the true dynamics. The two
disagree in the sign of the alpha2 term; both are logged and neither is corrected.
"""

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import expm

from friction_observers import kernels
from friction_observers.exception import ConfigError
from friction_observers.plant import PlantParams, PlantState, friction_force
from friction_observers.reference import ReferenceSample


@dataclass(frozen=True)
class ControllerGains:
    """
    Gains of the desired error dynamics e1'' + alpha2*e1' + alpha1*e1 = 0. Both strictly
    positive, which places both roots of s^2 + alpha2*s + alpha1 in the open left half plane.
    The defaults put a double pole at -0.7.
    """

    alpha1: float = 0.49
    alpha2: float = 1.4

    def __post_init__(self):
        for name in ("alpha1", "alpha2"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ConfigError(f"gains.{name}", "must be finite and strictly positive")


class EpsilonT(NamedTuple):
    """The two renderings of the closed-loop perturbation."""

    eps_formula: float
    eps_residual: float


def ideal_control(
    s: PlantState, ref: ReferenceSample, p: PlantParams, g: ControllerGains
) -> float:
    """
    Full-state, known-parameter tracking law u*.

    Args:
        s (PlantState): True state.
        ref (ReferenceSample): Reference sample.
        p (PlantParams): True plant constants.
        g (ControllerGains): Controller gains.

    Returns:
        float: u*.
    """
    return kernels.ideal_law(
        float(s.x1), float(s.x2), float(ref.r), float(ref.rdot), float(ref.rddot),
        float(p.theta1), float(p.theta2), float(p.vartheta), float(g.alpha1), float(g.alpha2),
    )


def ce_control(
    x1_meas: float,
    x2_hat: float,
    theta_hat: Sequence[float],
    ref: ReferenceSample,
    vartheta: float,
    g: ControllerGains,
) -> float:
    """
    Certainty equivalence version of the tracking law. The position error uses the measured,
    possibly noisy, position.

    Args:
        x1_meas (float): Measured position.
        x2_hat (float): Velocity estimate.
        theta_hat (Sequence[float]): Parameter estimate (theta1_hat, theta2_hat).
        ref (ReferenceSample): Reference sample.
        vartheta (float): Known friction steepness.
        g (ControllerGains): Controller gains.

    Returns:
        float: u.
    """
    return kernels.ce_law(
        float(x1_meas), float(x2_hat), float(theta_hat[0]), float(theta_hat[1]),
        float(ref.r), float(ref.rdot), float(ref.rddot), float(vartheta),
        float(g.alpha1), float(g.alpha2),
    )


def epsilon_t(
    x: PlantState,
    x2_hat: float,
    theta_hat: Sequence[float],
    p: PlantParams,
    vartheta: float,
    g: ControllerGains,
    u: Optional[float] = None,
    ref: Optional[ReferenceSample] = None,
) -> EpsilonT:
    """
    Perturbation of the error dynamics under certainty equivalence, with x2_tilde = x2_hat - x2
    and theta_tilde = theta_hat - theta.

    `eps_formula` is the closed-form expression, including its +alpha2*x2_tilde term.
    `eps_residual` is e2' + alpha1*e1 + alpha2*e2 evaluated on the true dynamics. When the
    applied `u` and the reference sample are given, the residual uses them directly, so
    measurement noise in the applied control shows up; otherwise the noise-free closed form
    is used.

    Args:
        x (PlantState): True state.
        x2_hat (float): Velocity estimate.
        theta_hat (Sequence[float]): Parameter estimate.
        p (PlantParams): True plant constants.
        vartheta (float): Known friction steepness used by the controller.
        g (ControllerGains): Controller gains.
        u (Optional[float]): Applied control.
        ref (Optional[ReferenceSample]): Reference sample matching `u`.

    Returns:
        EpsilonT: (eps_formula, eps_residual).
    """
    x2 = float(x.x2)
    x2_hat = float(x2_hat)
    th1_hat, th2_hat = float(theta_hat[0]), float(theta_hat[1])
    eps_formula = kernels.eps_formula(
        x2, x2_hat, th1_hat, th2_hat, float(p.theta1), float(p.theta2), float(p.vartheta),
        float(vartheta), float(g.alpha2),
    )

    if u is not None and ref is not None:
        eps_residual = kernels.eps_residual(
            float(x.x1), x2, float(u), float(ref.r), float(ref.rdot), float(ref.rddot),
            float(p.theta1), float(p.theta2), float(p.vartheta), float(g.alpha1),
            float(g.alpha2),
        )
    else:
        eps_residual = (
            -friction_force(x2, p)
            + th1_hat * x2_hat
            + th2_hat * math.tanh(vartheta * x2_hat)
            - g.alpha2 * (x2_hat - x2)
        )
    return EpsilonT(eps_formula, eps_residual)


def closed_loop_poles(g: ControllerGains) -> np.ndarray:
    """
    Roots of s^2 + alpha2*s + alpha1.

    Args:
        g (ControllerGains): Controller gains.

    Returns:
        np.ndarray: The two poles.
    """
    return np.roots([1.0, g.alpha2, g.alpha1])


def nominal_error_response(
    e1_0: float, e2_0: float, g: ControllerGains, t: Union[float, Sequence[float], np.ndarray]
) -> Union[float, np.ndarray]:
    """
    Closed-form position error of the ideal closed loop on a constant reference segment,
    e(t) = expm(A t) e(0) with A = [[0, 1], [-alpha1, -alpha2]].

    Args:
        e1_0 (float): Initial position error.
        e2_0 (float): Initial velocity error.
        g (ControllerGains): Controller gains.
        t (Union[float, Sequence[float], np.ndarray]): Time(s) since the start of the segment.

    Returns:
        Union[float, np.ndarray]: e1 at the requested time(s).
    """
    a = np.array([[0.0, 1.0], [-g.alpha1, -g.alpha2]])
    e0 = np.array([e1_0, e2_0])
    times = np.atleast_1d(np.asarray(t, dtype=float))
    e1 = np.array([(expm(a * tau) @ e0)[0] for tau in times])
    if np.ndim(t) == 0:
        return float(e1[0])
    return e1


def ideal_error_state(s: PlantState, ref: ReferenceSample) -> Tuple[float, float]:
    """Tracking errors (e1, e2) = (x1 - r, x2 - rdot)."""
    return s.x1 - ref.r, s.x2 - ref.rdot
