"""
The `integrate` module is the fixed-step simulation core: explicit Euler and classical RK4 steps
over a user supplied vector field, the sign function used by the discontinuous observer terms
(optionally regularized by a boundary layer), and the bookkeeping of the uniform time grid.

Everything here is a pure function of its inputs, so runs are bit-reproducible and the functions
are safe to call from concurrent workers.
"""

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Dict, Iterable, Sequence, Tuple, Union

import numpy as np

from friction_observers.exception import (
    ConfigError,
    ImmutablePropertyError,
    NumericalBlowup,
)
from friction_observers.kernels import sign_value


class IntegrationMethod(str, enum.Enum):
    """Explicit fixed-step schemes."""

    EULER = "euler"
    RK4 = "rk4"


@dataclass(frozen=True)
class SignMode:
    """
    How sign(z) is evaluated. `exact` is the relay -1/0/+1; `boundary_layer` replaces it by
    clamp(z / eps, -1, 1).
    """

    kind: str = "exact"
    eps: float = 0.0

    def __post_init__(self):
        if self.kind not in ("exact", "boundary_layer"):
            raise ConfigError("sign_mode", f"unknown sign mode '{self.kind}'")
        if self.kind == "boundary_layer":
            if not (isinstance(self.eps, (int, float)) and math.isfinite(self.eps) and self.eps > 0):
                raise ConfigError("boundary_layer", "eps must be strictly positive")

    @classmethod
    def exact(cls) -> "SignMode":
        return cls("exact", 0.0)

    @classmethod
    def boundary_layer(cls, eps: float) -> "SignMode":
        return cls("boundary_layer", eps)


EXACT_SIGN = SignMode.exact()


@dataclass(frozen=True)
class IntegratorConfig:
    """
    Fixed-step integration settings.

    Attributes:
        method (IntegrationMethod): Euler or RK4.
        step_h (float): Step size in seconds.
        t_end (float): Final time in seconds. The grid has floor(t_end / step_h) steps.
        sign_mode (SignMode): Evaluation of the relay terms.
    """

    method: IntegrationMethod = IntegrationMethod.RK4
    step_h: float = 1.0e-4
    t_end: float = 150.0
    sign_mode: SignMode = EXACT_SIGN

    def __post_init__(self):
        try:
            object.__setattr__(self, "method", IntegrationMethod(self.method))
        except ValueError as err:
            raise ConfigError("integrator.method", f"unknown method '{self.method}'") from err
        if not (math.isfinite(self.step_h) and self.step_h > 0):
            raise ConfigError("integrator.step", "step must be strictly positive")
        if not (math.isfinite(self.t_end) and self.t_end >= self.step_h):
            raise ConfigError("duration", "duration must be at least one step")

    @property
    def n_steps(self) -> int:
        """
        Number of steps on the grid, floor(t_end / step_h) computed exactly on the decimal
        values so that e.g. 150 / 1e-4 gives 1500000 and not 1499999.
        """
        return math.floor(Fraction(repr(self.t_end)) / Fraction(repr(self.step_h)))

    def time_at(self, n: int) -> float:
        """Time of grid point n. Computed as n*h, never accumulated."""
        return n * self.step_h


def time_grid(cfg: IntegratorConfig) -> np.ndarray:
    """
    The full uniform grid t_0 = 0, ..., t_N = N*h.

    Args:
        cfg (IntegratorConfig): Integration settings.

    Returns:
        np.ndarray: N + 1 time instants.
    """
    return np.arange(cfg.n_steps + 1, dtype=float) * cfg.step_h


def sgn(z: float, mode: SignMode = EXACT_SIGN) -> float:
    """
    Sign function used by the discontinuous observer injections.

    Args:
        z (float): Argument.
        mode (SignMode): `exact` returns -1, 0 or +1 with sign(0) = 0. `boundary_layer`
            returns clamp(z / eps, -1, 1).

    Returns:
        float: A value in [-1, 1].
    """
    return sign_value(float(z), 0.0 if mode.kind == "exact" else float(mode.eps))


class StateVector:
    """
    An ordered list of named real components. The names fix the dimension at construction;
    values are stored as a float array.
    """

    __slots__ = ("_names", "_values", "_index")

    def __init__(self, names: Sequence[str], values: Union[Sequence[float], np.ndarray]):
        names = tuple(names)
        values = np.array(values, dtype=float).reshape(-1)
        if len(set(names)) != len(names):
            raise ValueError("State component names must be unique: %s" % (names,))
        if len(names) != values.size:
            raise ValueError(
                "Got %d names for %d values." % (len(names), values.size)
            )
        self._names: Tuple[str, ...] = names
        self._values: np.ndarray = values
        self._values.setflags(write=False)
        self._index: Dict[str, int] = {name: i for i, name in enumerate(names)}

    def __repr__(self):
        inner = ", ".join(f"{n}={v!r}" for n, v in zip(self._names, self._values.tolist()))
        return f"<StateVector: {inner}>"

    def __len__(self):
        return len(self._names)

    def __getitem__(self, name: str) -> float:
        return float(self._values[self._index[name]])

    def __eq__(self, other):
        if not isinstance(other, StateVector):
            return NotImplemented
        return self._names == other._names and np.array_equal(self._values, other._values)

    __hash__ = None

    @property
    def names(self) -> Tuple[str, ...]:
        """
        Component names, in order.

        Returns:
            Tuple[str, ...]: The names.
        """
        return self._names

    @names.setter
    def names(self, _):
        raise ImmutablePropertyError("Property names is immutable.")

    @property
    def values(self) -> np.ndarray:
        """
        A read-only view of the component values.

        Returns:
            np.ndarray: The values.
        """
        return self._values

    @values.setter
    def values(self, _):
        raise ImmutablePropertyError("Property values is immutable.")

    def with_values(self, values: Union[Sequence[float], np.ndarray]) -> "StateVector":
        """A new StateVector with the same names and the given values."""
        return StateVector(self._names, values)

    def as_dict(self) -> Dict[str, float]:
        return dict(zip(self._names, self._values.tolist()))

    def check_finite(self, t: float) -> None:
        """
        Raise NumericalBlowup naming the first non-finite component.

        Args:
            t (float): Time used in the diagnostic.
        """
        check_finite(self._values, self._names, t)


def check_finite(values: np.ndarray, names: Iterable[str], t: float) -> None:
    """
    Raise NumericalBlowup for the first non-finite entry of `values`.

    Args:
        values (np.ndarray): State values.
        names (Iterable[str]): Matching component names.
        t (float): Time used in the diagnostic.
    """
    if np.isfinite(values).all():
        return
    for name, value in zip(names, values.tolist()):
        if not math.isfinite(value):
            raise NumericalBlowup(t, name, value)


ArrayField = Callable[[float, np.ndarray], np.ndarray]


def step_array(
    field: ArrayField, x: np.ndarray, t: float, h: float, method: IntegrationMethod
) -> np.ndarray:
    """
    One explicit step on a bare array state. This is the kernel behind integrate_step; the
    scenario runner calls it directly to avoid re-wrapping the state at every step.

    Args:
        field (ArrayField): f(t, x) returning dx/dt as an array of the same shape.
        x (np.ndarray): State at time t.
        t (float): Current time.
        h (float): Step size.
        method (IntegrationMethod): Euler or RK4.

    Returns:
        np.ndarray: The state at t + h.
    """
    if method is IntegrationMethod.EULER:
        return x + h * field(t, x)
    half = 0.5 * h
    k1 = field(t, x)
    k2 = field(t + half, x + half * k1)
    k3 = field(t + half, x + half * k2)
    k4 = field(t + h, x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


VectorField = Callable[[float, StateVector], Union[StateVector, Sequence[float], np.ndarray]]


def integrate_step(
    field: VectorField, x: StateVector, t: float, cfg: IntegratorConfig
) -> StateVector:
    """
    Advance a named state by one step of size cfg.step_h.

    Args:
        field (VectorField): f(t, x) returning the time derivative, either as a StateVector
            with the same names or as a plain sequence in component order.
        x (StateVector): State at time t; must be finite.
        t (float): Current time.
        cfg (IntegratorConfig): Method and step size.

    Raises:
        NumericalBlowup: If the field produces a non-finite value. Carries t and the name of
            the offending component.

    Returns:
        StateVector: The state at t + h.
    """
    x.check_finite(t)
    names = x.names

    def array_field(tau: float, values: np.ndarray) -> np.ndarray:
        out = field(tau, StateVector(names, values))
        if isinstance(out, StateVector):
            return np.array(out.values, dtype=float)
        return np.asarray(out, dtype=float)

    new_values = step_array(array_field, np.array(x.values), t, cfg.step_h, cfg.method)
    check_finite(new_values, names, t)
    return StateVector(names, new_values)
