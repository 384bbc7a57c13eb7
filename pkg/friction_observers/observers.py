"""
The two adaptive velocity observers compared by the toolkit.

Immersion and invariance (I&I) observer. Integrator states x2I, theta1I, theta2I and one gain
k1 > 0; the estimates are algebraic functions of these states and the measured position:

    x2_hat     = x2I + k1 * x1
    theta1_hat = theta1I - (vartheta / (2 k1)) * x2_hat**2
    theta2_hat = theta2I - (1 / k1) * logcosh(vartheta * x2_hat)
    x2I'       = -(theta1_hat + k1) * x2_hat - theta2_hat * tanh(vartheta * x2_hat) + u
    theta1I'   = (vartheta / k1) * x2_hat * (x2I' + k1 * x2_hat)
    theta2I'   = (vartheta / k1) * tanh(vartheta * x2_hat) * (x2I' + k1 * x2_hat)

Super-twisting sliding mode (SM) observer with covariance-based adaptation of the deviation
delta_theta_hat from nominal parameters theta_bar. With innovation e = x1 - x1_hat and
regressor phi = (-x2_hat, -tanh(vartheta * x2)):

    x1_hat'          = x2_hat + c2 * sqrt(|e|) * sign(e)
    x2_hat'          = u + phi . theta_bar + c1 * sign(e)
    delta_theta_hat' = Gamma phi (-phi . delta_theta_hat + c1 * sign(e))
    Gamma'           = -Gamma phi phi^T Gamma

and theta_hat = delta_theta_hat + theta_bar. The second regressor entry uses the true velocity,
which the simulator owns; the ablation switches of the scenario can substitute x2_hat.

The public functions take the state dataclasses and evaluate the compiled float kernels of
`friction_observers.kernels`, the same ones the closed loop runs at every RK4 stage.
"""

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Tuple

import numpy as np

from friction_observers.exception import ConfigError, CovarianceDegenerate
from friction_observers import kernels
from friction_observers.integrate import EXACT_SIGN, SignMode
from friction_observers.utils import is_positive_definite


def _check_positive(name: str, value: float) -> None:
    if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
        raise ConfigError(name, "must be finite and strictly positive")


#####################
# I&I observer      #
#####################


@dataclass(frozen=True)
class IandIState:
    """
    Integrator states and gain of the I&I observer.

    Attributes:
        x2I (float): Observer integrator state.
        theta1I (float): First adaptation integrator.
        theta2I (float): Second adaptation integrator.
        k1 (float): Tuning gain, > 0.
        frozen_theta (Optional[Tuple[float, float]]): Known-parameter mode. When set, the
            parameter estimates are pinned to these values and the adaptation integrators do
            not move.
    """

    x2I: float = 0.0
    theta1I: float = 0.0
    theta2I: float = 0.0
    k1: float = 1.0
    frozen_theta: Optional[Tuple[float, float]] = None

    def __post_init__(self):
        _check_positive("iandi.k1", self.k1)
        for name in ("x2I", "theta1I", "theta2I"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(f"iandi.{name}", "must be finite")
        if self.frozen_theta is not None:
            frozen = tuple(float(v) for v in self.frozen_theta)
            if len(frozen) != 2 or not all(math.isfinite(v) for v in frozen):
                raise ConfigError("iandi.frozen_theta", "must be two finite numbers")
            object.__setattr__(self, "frozen_theta", frozen)


def _frozen(s: "IandIState") -> Tuple[bool, float, float]:
    if s.frozen_theta is None:
        return False, 0.0, 0.0
    return True, s.frozen_theta[0], s.frozen_theta[1]


class IandIOutputs(NamedTuple):
    """Estimates produced by the I&I observer."""

    x2_hat: float
    theta1_hat: float
    theta2_hat: float


class IandIDerivative(NamedTuple):
    """Time derivative of the I&I integrator states."""

    x2I: float
    theta1I: float
    theta2I: float


def ii_outputs(s: IandIState, x1: float, vartheta: float) -> IandIOutputs:
    """
    Algebraic estimates of the I&I observer.

    Args:
        s (IandIState): Observer state.
        x1 (float): Measured position.
        vartheta (float): Known friction steepness.

    Returns:
        IandIOutputs: (x2_hat, theta1_hat, theta2_hat).
    """
    return IandIOutputs(
        *kernels.ii_outputs(s.x2I, s.theta1I, s.theta2I, s.k1, x1, vartheta, *_frozen(s))
    )


def ii_deriv(s: IandIState, x1: float, u: float, vartheta: float) -> IandIDerivative:
    """
    Time derivative of the I&I integrator states.

    Args:
        s (IandIState): Observer state.
        x1 (float): Measured position.
        u (float): Applied control.
        vartheta (float): Known friction steepness.

    Returns:
        IandIDerivative: (x2I', theta1I', theta2I').
    """
    return IandIDerivative(
        *kernels.ii_rates(s.x2I, s.theta1I, s.theta2I, s.k1, x1, u, vartheta, *_frozen(s))
    )


#####################
# SM observer       #
#####################


@dataclass(frozen=True, eq=False)
class SMState:
    """
    State and gains of the super-twisting observer.

    Attributes:
        x1_hat (float): Position estimate.
        x2_hat (float): Velocity estimate.
        delta_theta_hat (np.ndarray): Estimate of theta - theta_bar, shape (2,).
        gamma (np.ndarray): Adaptation covariance, symmetric positive-definite, shape (2, 2).
        theta_bar (np.ndarray): Nominal parameters, shape (2,).
        c1 (float): Gain of the integrated sign term, > 0.
        c2 (float): Gain of the square-root injection, > 0.
    """

    x1_hat: float = 0.0
    x2_hat: float = 0.1
    delta_theta_hat: np.ndarray = field(default_factory=lambda: np.zeros(2))
    gamma: np.ndarray = field(default_factory=lambda: np.diag([500.0, 500.0]))
    theta_bar: np.ndarray = field(default_factory=lambda: np.array([0.2, 0.5]))
    c1: float = 0.5
    c2: float = 25.0

    def __post_init__(self):
        _check_positive("slidingmode.c1", self.c1)
        _check_positive("slidingmode.c2", self.c2)
        object.__setattr__(self, "delta_theta_hat", np.asarray(self.delta_theta_hat, float).reshape(2))
        object.__setattr__(self, "gamma", np.asarray(self.gamma, float).reshape(2, 2))
        object.__setattr__(self, "theta_bar", np.asarray(self.theta_bar, float).reshape(2))


class SMDerivative(NamedTuple):
    """Time derivative of the SM observer state."""

    x1_hat: float
    x2_hat: float
    delta_theta_hat: np.ndarray
    gamma: np.ndarray


def sm_regressor(x2_hat: float, x2_true: float, vartheta: float) -> Tuple[float, float]:
    """
    Regressor of the SM adaptation, (-x2_hat, -tanh(vartheta * x2)).

    The second entry uses the velocity passed as `x2_true`; the closed loop hands in the
    plant's true velocity unless the regressor ablation asks for the estimate.

    Args:
        x2_hat (float): Velocity estimate.
        x2_true (float): Velocity used inside the tanh.
        vartheta (float): Known friction steepness.

    Returns:
        Tuple[float, float]: The regressor.
    """
    return -x2_hat, -math.tanh(vartheta * x2_true)


def sm_deriv(
    s: SMState,
    x1_meas: float,
    x2_true: float,
    u: float,
    vartheta: float,
    sign_mode: SignMode = EXACT_SIGN,
    adapted_feedforward: bool = False,
) -> SMDerivative:
    """
    Time derivative of the SM observer state.

    Args:
        s (SMState): Observer state; gamma must be positive-definite.
        x1_meas (float): Measured position, entering the innovation x1_meas - x1_hat.
        x2_true (float): Velocity used in the regressor.
        u (float): Applied control.
        vartheta (float): Known friction steepness.
        sign_mode (SignMode): Evaluation of sign(.).
        adapted_feedforward (bool): Use theta_hat instead of theta_bar in the x2_hat equation.

    Raises:
        CovarianceDegenerate: If gamma is not positive-definite.

    Returns:
        SMDerivative: (x1_hat', x2_hat', delta_theta_hat', gamma').
    """
    (g11, g12), (g21, g22) = s.gamma.tolist()
    d1, d2 = s.delta_theta_hat.tolist()
    tb1, tb2 = s.theta_bar.tolist()
    if not is_positive_definite(g11, g12, g21, g22):
        raise CovarianceDegenerate(None, ((g11, g12), (g21, g22)))
    eps = 0.0 if sign_mode.kind == "exact" else float(sign_mode.eps)
    rates = kernels.sm_rates(
        s.x1_hat, s.x2_hat, d1, d2, g11, g12, g21, g22, float(x1_meas), float(x2_true),
        float(u), float(vartheta), tb1, tb2, float(s.c1), float(s.c2), eps,
        bool(adapted_feedforward),
    )
    return SMDerivative(
        rates[0],
        rates[1],
        np.array(rates[2:4]),
        np.array(rates[4:8]).reshape(2, 2),
    )


def sm_theta_hat(s: SMState) -> np.ndarray:
    """
    Parameter estimate of the SM observer, delta_theta_hat + theta_bar.

    Args:
        s (SMState): Observer state.

    Returns:
        np.ndarray: theta_hat, shape (2,).
    """
    return s.delta_theta_hat + s.theta_bar


def matched_delta_theta(
    theta_bar: Tuple[float, float], x1_0: float, vartheta: float, ii_state: IandIState = IandIState()
) -> Tuple[float, float]:
    """
    Initial delta_theta_hat for which the SM parameter estimate starts where the I&I estimate
    starts, theta_hat(0) = ii_outputs(ii_state, x1(0)).theta_hat.

    Args:
        theta_bar (Tuple[float, float]): Nominal parameters.
        x1_0 (float): Initial measured position.
        vartheta (float): Known friction steepness.
        ii_state (IandIState): The I&I initial state to match.

    Returns:
        Tuple[float, float]: delta_theta_hat(0).
    """
    out = ii_outputs(ii_state, x1_0, vartheta)
    return out.theta1_hat - theta_bar[0], out.theta2_hat - theta_bar[1]
