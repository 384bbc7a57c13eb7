"""
The `scenario` module implements the ScenarioRunner class, which simulates one closed loop:
the friction plant, one of the two adaptive velocity observers, and the certainty equivalence
tracking law (or the ideal full-state law), all integrated together on one fixed-step grid.

A run produces a decimated RunLog for plotting and CSV export, and a Metrics summary computed
on the full, undecimated grid. Position measurements may be corrupted by noise that is redrawn
at the measurement rate and held in between, so the noise realization does not depend on the
integration step.

The module also holds the experiment-level helpers: total variation as a chattering index, the
decay rate bound of the I&I observer's energy function, and the sweep over the observer gain k1.
"""

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from friction_observers import kernels
from friction_observers.controller import ControllerGains
from friction_observers.exception import (
    ConfigError,
    CovarianceDegenerate,
    FrictionObserverError,
    ImmutablePropertyError,
    InvalidInput,
    NumericalBlowup,
)
from friction_observers.integrate import IntegratorConfig, IntegrationMethod, check_finite
from friction_observers.observers import IandIState, matched_delta_theta
from friction_observers.plant import PlantParams, PlantState
from friction_observers.reference import PiecewiseReference, default_reference
from friction_observers.runlog import RunLog, iandi_columns, sm_columns
from friction_observers.utils import is_positive_definite

# Create a custom logger
log: logging.Logger = logging.getLogger(__name__)

# The handler lives on the package logger so every module's records reach it.
package_log: logging.Logger = logging.getLogger("friction_observers")
if not package_log.handlers:
    c_handler: logging.StreamHandler = logging.StreamHandler()
    c_handler.setLevel(logging.WARNING)
    c_format: logging.Formatter = logging.Formatter("%(name)s - %(levelname)s - %(message)s")
    c_handler.setFormatter(c_format)
    package_log.addHandler(c_handler)

IANDI = "iandi"
SLIDING_MODE = "slidingmode"
OBSERVERS = (IANDI, SLIDING_MODE)

CERTAINTY_EQUIVALENCE = "certainty_equivalence"
IDEAL = "ideal"
CONTROLLERS = (CERTAINTY_EQUIVALENCE, IDEAL)

MULTIPLICATIVE = "multiplicative"
ADDITIVE = "additive"

BENCHMARK_NOISE_AMPLITUDE = 3.0e-4
MAX_SEED = 2**64


###########################
# Scenario configuration  #
###########################


@dataclass(frozen=True)
class IandIConfig:
    """
    Initial state and gain of the I&I observer.

    Attributes:
        k1 (float): Tuning gain, > 0.
        x2I (float): Initial observer integrator state.
        theta1I (float): Initial first adaptation integrator.
        theta2I (float): Initial second adaptation integrator.
        frozen_theta (Optional[Tuple[float, float]]): Known-parameter mode, see IandIState.
    """

    k1: float = 1.0
    x2I: float = 0.0
    theta1I: float = 0.0
    theta2I: float = 0.0
    frozen_theta: Optional[Tuple[float, float]] = None

    def __post_init__(self):
        # IandIState owns the invariants.
        state = self.initial_state()
        object.__setattr__(self, "frozen_theta", state.frozen_theta)

    def initial_state(self) -> IandIState:
        return IandIState(self.x2I, self.theta1I, self.theta2I, self.k1, self.frozen_theta)


@dataclass(frozen=True)
class SlidingModeConfig:
    """
    Gains, initial state and ablation switches of the SM observer.

    Attributes:
        c1 (float): Gain of the integrated sign term, > 0.
        c2 (float): Gain of the square-root injection, > 0.
        gamma0 (Tuple[Tuple[float, float], Tuple[float, float]]): Initial covariance, symmetric
            positive-definite.
        theta_bar (Tuple[float, float]): Nominal parameters.
        x1_hat (float): Initial position estimate.
        x2_hat (float): Initial velocity estimate.
        delta_theta_hat (Optional[Tuple[float, float]]): Initial deviation estimate. None picks
            the value for which theta_hat(0) equals the default I&I estimate at x1(0).
        regressor_velocity (str): `true` uses the plant velocity inside the regressor tanh,
            `estimate` uses x2_hat.
        innovation_position (str): `measured` uses the noisy position in the innovation, `true`
            the noise-free one.
        adapted_feedforward (bool): Use theta_hat instead of theta_bar in the x2_hat equation.
            On by default: with theta_bar the model mismatch phi . (theta - theta_bar) is about
            0.5 + 0.2|x2|, at or above c1, and the observer loses sliding once the plant moves.
            False is the ablation that keeps the nominal feedforward.
    """

    c1: float = 0.5
    c2: float = 25.0
    gamma0: Tuple[Tuple[float, float], Tuple[float, float]] = ((500.0, 0.0), (0.0, 500.0))
    theta_bar: Tuple[float, float] = (0.2, 0.5)
    x1_hat: float = 0.0
    x2_hat: float = 0.1
    delta_theta_hat: Optional[Tuple[float, float]] = None
    regressor_velocity: str = "true"
    innovation_position: str = "measured"
    adapted_feedforward: bool = True

    def __post_init__(self):
        for name in ("c1", "c2"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ConfigError(f"slidingmode.{name}", "must be finite and strictly positive")
        try:
            gamma = tuple(tuple(float(v) for v in row) for row in self.gamma0)
        except (TypeError, ValueError) as err:
            raise ConfigError("slidingmode.gamma0", "must be a 2x2 matrix") from err
        if len(gamma) != 2 or any(len(row) != 2 for row in gamma):
            raise ConfigError("slidingmode.gamma0", "must be a 2x2 matrix")
        if gamma[0][1] != gamma[1][0]:
            raise ConfigError("slidingmode.gamma0", "must be symmetric")
        if not is_positive_definite(gamma[0][0], gamma[0][1], gamma[1][0], gamma[1][1]):
            raise ConfigError("slidingmode.gamma0", "must be positive-definite")
        object.__setattr__(self, "gamma0", gamma)
        object.__setattr__(self, "theta_bar", _pair("slidingmode.theta_bar", self.theta_bar))
        if self.delta_theta_hat is not None:
            object.__setattr__(
                self,
                "delta_theta_hat",
                _pair("slidingmode.delta_theta_hat", self.delta_theta_hat),
            )
        if self.regressor_velocity not in ("true", "estimate"):
            raise ConfigError(
                "slidingmode.regressor_velocity", "must be 'true' or 'estimate'"
            )
        if self.innovation_position not in ("measured", "true"):
            raise ConfigError(
                "slidingmode.innovation_position", "must be 'measured' or 'true'"
            )
        for name in ("x1_hat", "x2_hat"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(f"slidingmode.{name}", "must be finite")

    def initial_delta(self, x1_0: float, vartheta: float) -> Tuple[float, float]:
        if self.delta_theta_hat is not None:
            return self.delta_theta_hat
        return matched_delta_theta(self.theta_bar, x1_0, vartheta)


def _pair(name: str, values) -> Tuple[float, float]:
    try:
        pair = tuple(float(v) for v in values)
    except (TypeError, ValueError) as err:
        raise ConfigError(name, "must be two numbers") from err
    if len(pair) != 2 or not all(math.isfinite(v) for v in pair):
        raise ConfigError(name, "must be two finite numbers")
    return pair


@dataclass(frozen=True)
class NoiseConfig:
    """
    Position measurement noise. With `multiplicative` the measurement is x1 * (1 + a*w), with
    `additive` it is x1 + a*w, where w is uniform on [-1, 1], redrawn at `rate` Hz and held
    in between.
    """

    amplitude: float = 0.0
    rate: float = 1000.0
    model: str = MULTIPLICATIVE

    def __post_init__(self):
        if not (math.isfinite(self.amplitude) and self.amplitude >= 0):
            raise ConfigError("noise_amplitude", "must be finite and non-negative")
        if not (math.isfinite(self.rate) and self.rate > 0):
            raise ConfigError("noise.rate", "must be strictly positive")
        if self.model not in (MULTIPLICATIVE, ADDITIVE):
            raise ConfigError("noise.model", f"unknown noise model '{self.model}'")


@dataclass(frozen=True)
class MetricsConfig:
    """
    Windows and thresholds of the summary metrics. None windows default to [t_end/2, t_end];
    the chattering window starts at 100 s when the run is longer than that.

    Under the benchmark noise the post-transient observer error grows about linearly with k1,
    reaching roughly 0.056 at k1 = 88 and 0.095 at k1 = 150. The default degraded threshold
    sits between the two.
    """

    window_start: Optional[float] = None
    window_end: Optional[float] = None
    tv_window_start: Optional[float] = None
    settle_tolerance: float = 0.02
    divergence_bound: float = 1.0e6
    degraded_threshold: float = 0.075

    def __post_init__(self):
        for name in ("settle_tolerance", "divergence_bound", "degraded_threshold"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ConfigError(f"metrics.{name}", "must be finite and strictly positive")

    def windows(self, t_end: float) -> Tuple[Tuple[float, float], Tuple[float, float]]:
        start = t_end / 2.0 if self.window_start is None else self.window_start
        end = t_end if self.window_end is None else self.window_end
        if self.tv_window_start is not None:
            tv_start = self.tv_window_start
        else:
            tv_start = 100.0 if t_end > 100.0 else start
        if not (0 <= start < end) or not (0 <= tv_start < end):
            raise ConfigError("metrics", "metric windows must lie inside the run")
        return (start, end), (tv_start, end)


@dataclass(frozen=True)
class ScenarioConfig:
    """
    Full description of one closed-loop experiment.

    Attributes:
        observer (str): `iandi` or `slidingmode`.
        controller (str): `certainty_equivalence` or `ideal`.
        plant_params (PlantParams): True plant constants.
        gains (ControllerGains): Controller gains.
        observer_gains (Union[IandIConfig, SlidingModeConfig]): Must match `observer`.
        integrator (IntegratorConfig): Method, step and duration.
        noise (NoiseConfig): Measurement noise.
        seed (int): Seed of the noise stream, 0 <= seed < 2**64.
        initial (PlantState): Initial plant state.
        reference (PiecewiseReference): Desired trajectory.
        decimation (int): Log every `decimation`-th grid point.
        metrics (MetricsConfig): Metric windows and thresholds.
        label (str): Run label used in reports and figures; empty picks one.
    """

    observer: str = IANDI
    controller: str = CERTAINTY_EQUIVALENCE
    plant_params: PlantParams = field(default_factory=PlantParams)
    gains: ControllerGains = field(default_factory=ControllerGains)
    observer_gains: Union[IandIConfig, SlidingModeConfig, None] = None
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    seed: int = 0
    initial: PlantState = PlantState(0.1, 0.5)
    reference: PiecewiseReference = field(default_factory=default_reference)
    decimation: int = 10
    metrics: MetricsConfig = field(default_factory=MetricsConfig)
    label: str = ""

    def __post_init__(self):
        if self.observer not in OBSERVERS:
            raise ConfigError("observer", f"unknown observer '{self.observer}'")
        if self.controller not in CONTROLLERS:
            raise ConfigError("controller", f"unknown controller '{self.controller}'")
        if self.observer_gains is None:
            default = IandIConfig() if self.observer == IANDI else SlidingModeConfig()
            object.__setattr__(self, "observer_gains", default)
        expected = IandIConfig if self.observer == IANDI else SlidingModeConfig
        if not isinstance(self.observer_gains, expected):
            raise ConfigError(
                "observer_gains", f"gains of type {type(self.observer_gains).__name__} "
                f"do not belong to observer '{self.observer}'"
            )
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or not 0 <= self.seed < MAX_SEED:
            raise ConfigError("seed", "must be an integer in [0, 2**64)")
        if isinstance(self.decimation, bool) or not isinstance(self.decimation, int) or self.decimation < 1:
            raise ConfigError("logging.decimation", "must be a positive integer")
        hold_steps(self.noise.rate, self.integrator.step_h)
        initial = PlantState(*(float(v) for v in self.initial))
        if not all(math.isfinite(v) for v in initial):
            raise ConfigError("initial", "initial state must be finite")
        object.__setattr__(self, "initial", initial)
        # Metric windows must fit the run.
        self.metrics.windows(self.integrator.t_end)

    @property
    def run_label(self) -> str:
        if self.label:
            return self.label
        name = "I&I" if self.observer == IANDI else "SM"
        noise = "noisy" if self.noise.amplitude > 0 else "noise-free"
        return f"{name} {noise}"


###########################
# Metrics                 #
###########################


@dataclass(frozen=True)
class Metrics:
    """
    Scalar summary of a run, computed on the full integration grid.

    Attributes:
        rms_tracking_error (float): RMS of x1 - r over the metrics window.
        max_observer_error (float): Max |x2_hat - x2| over the metrics window.
        theta_error_final (Tuple[float, float]): theta_hat - theta at the last computed step.
        control_total_variation (float): Total variation of u over the chattering window.
        diverged (bool): True if the run aborted on a numerical failure.
        diverged_at (Optional[float]): Time of the failure.
        settle_time (Optional[float]): Time after which |x1 - r| stays within the settle
            tolerance until the end, or None if it never settles.
        max_tracking_error (float): Max |x1 - r| over the metrics window.
        window (Tuple[float, float]): Metrics window.
        tv_window (Tuple[float, float]): Chattering window.
        error (Optional[str]): Diagnostic of a failed run.
    """

    rms_tracking_error: float
    max_observer_error: float
    theta_error_final: Tuple[float, float]
    control_total_variation: float
    diverged: bool = False
    diverged_at: Optional[float] = None
    settle_time: Optional[float] = None
    max_tracking_error: float = float("nan")
    window: Tuple[float, float] = (float("nan"), float("nan"))
    tv_window: Tuple[float, float] = (float("nan"), float("nan"))
    error: Optional[str] = None


def _finish_metrics(
    stats: np.ndarray,
    window: Tuple[float, float],
    tv_window: Tuple[float, float],
    theta_error: Tuple[float, float],
    diverged_at: Optional[float],
    error: Optional[str],
) -> Metrics:
    nan = float("nan")
    count = stats[kernels.S_COUNT]
    last_violation = float(stats[kernels.S_LAST_VIOLATION])
    last_t = float(stats[kernels.S_LAST_T])
    diverged = diverged_at is not None
    if diverged or math.isnan(last_t) or last_violation == last_t:
        settle = None
    elif math.isnan(last_violation):
        settle = 0.0
    else:
        settle = last_violation
    return Metrics(
        rms_tracking_error=math.sqrt(stats[kernels.S_SQUARES] / count) if count else nan,
        max_observer_error=float(stats[kernels.S_MAX_OBSERVER]) if count else nan,
        theta_error_final=theta_error,
        control_total_variation=float(stats[kernels.S_TOTAL_VARIATION]),
        diverged=diverged,
        diverged_at=diverged_at,
        settle_time=settle,
        max_tracking_error=float(stats[kernels.S_MAX_TRACKING]) if count else nan,
        window=window,
        tv_window=tv_window,
        error=error,
    )


###########################
# Measurement             #
###########################


def measure(x1: float, w: float, amplitude: float, model: str = MULTIPLICATIVE) -> float:
    """
    Corrupt a position sample with noise.

    Args:
        x1 (float): True position.
        w (float): Noise draw in [-1, 1].
        amplitude (float): Noise amplitude a >= 0.
        model (str): `multiplicative`, y = x1 * (1 + a*w), or `additive`, y = x1 + a*w.

    Returns:
        float: Measured position.
    """
    return kernels.noisy_position(float(x1), float(w), float(amplitude), model == ADDITIVE)


def hold_steps(rate: float, step_h: float) -> int:
    """
    Number of integration steps a measurement sample is held for.

    Args:
        rate (float): Measurement rate in Hz.
        step_h (float): Integration step in seconds.

    Raises:
        ConfigError: If the measurement period is shorter than one step or is not a whole
            number of steps.

    Returns:
        int: 1 / (rate * step_h), exactly.
    """
    ratio = 1.0 / (rate * step_h)
    n = round(ratio)
    if n < 1:
        raise ConfigError("noise.rate", "measurement rate cannot exceed 1 / step")
    if abs(ratio - n) > 1e-9 * ratio:
        raise ConfigError(
            "noise.rate",
            f"measurement period 1/{rate:g} s is not a whole number of {step_h:g} s steps",
        )
    return n


class MeasurementChannel:
    """
    Deterministic noise stream. Draws are taken from numpy's default generator seeded with the
    scenario seed, one per measurement sample, and held constant between samples. With zero
    amplitude the generator is never touched.
    """

    __slots__ = ("_amplitude", "_model", "_steps_per_sample", "_draws")

    def __init__(self, noise: NoiseConfig, seed: int, step_h: float, n_steps: int):
        self._amplitude: float = noise.amplitude
        self._model: str = noise.model
        self._steps_per_sample: int = hold_steps(noise.rate, step_h)
        n_samples = n_steps // self._steps_per_sample + 1
        if noise.amplitude > 0:
            rng = np.random.default_rng(seed)
            self._draws: np.ndarray = rng.uniform(-1.0, 1.0, size=n_samples)
        else:
            self._draws = np.zeros(n_samples)
        self._draws.setflags(write=False)
        log.debug(
            "Noise channel: %d samples, held for %d steps each",
            n_samples,
            self._steps_per_sample,
        )

    @property
    def steps_per_sample(self) -> int:
        return self._steps_per_sample

    @steps_per_sample.setter
    def steps_per_sample(self, _):
        raise ImmutablePropertyError("Property steps_per_sample is immutable.")

    @property
    def draws(self) -> np.ndarray:
        """
        One draw per measurement sample; grid step k uses draws[k // steps_per_sample].

        Returns:
            np.ndarray: Read-only draws in [-1, 1].
        """
        return self._draws

    @draws.setter
    def draws(self, _):
        raise ImmutablePropertyError("Property draws is immutable.")

    def draw(self, step_index: int) -> float:
        """The noise draw held over grid step `step_index`."""
        return float(self._draws[step_index // self._steps_per_sample])

    def measure(self, x1: float, w: float) -> float:
        return measure(x1, w, self._amplitude, self._model)


###########################
# Closed loops            #
###########################


IANDI_STATE = ("x1", "x2", "x2I", "theta1I", "theta2I")
IANDI_INTERNALS = ("x2I", "theta1I", "theta2I")
SM_STATE = (
    "x1", "x2", "x1_hat", "x2_hat", "delta_theta1", "delta_theta2",
    "gamma11", "gamma12", "gamma21", "gamma22",
)
SM_INTERNALS = ("delta_theta1", "delta_theta2", "gamma11", "gamma12", "gamma21", "gamma22")


def _initial_state(cfg: ScenarioConfig) -> np.ndarray:
    x0 = cfg.initial
    g = cfg.observer_gains
    if cfg.observer == IANDI:
        return np.array([x0.x1, x0.x2, g.x2I, g.theta1I, g.theta2I], dtype=float)
    d1, d2 = g.initial_delta(x0.x1, cfg.plant_params.vartheta)
    (g11, g12), (g21, g22) = g.gamma0
    return np.array([x0.x1, x0.x2, g.x1_hat, g.x2_hat, d1, d2, g11, g12, g21, g22], dtype=float)


def _parameters(cfg: ScenarioConfig) -> np.ndarray:
    """Flatten the scenario into the parameter vector of the compiled loop."""
    p = np.zeros(kernels.N_PARAMS)
    plant = cfg.plant_params
    p[kernels.P_THETA1] = plant.theta1
    p[kernels.P_THETA2] = plant.theta2
    p[kernels.P_VARTHETA] = plant.vartheta
    p[kernels.P_ALPHA1] = cfg.gains.alpha1
    p[kernels.P_ALPHA2] = cfg.gains.alpha2
    p[kernels.P_AMPLITUDE] = cfg.noise.amplitude
    p[kernels.P_ADDITIVE] = cfg.noise.model == ADDITIVE
    p[kernels.P_IDEAL] = cfg.controller == IDEAL
    mode = cfg.integrator.sign_mode
    p[kernels.P_SIGN_EPS] = 0.0 if mode.kind == "exact" else mode.eps
    g = cfg.observer_gains
    if cfg.observer == IANDI:
        p[kernels.P_K1] = g.k1
        if g.frozen_theta is not None:
            p[kernels.P_FROZEN] = 1.0
            p[kernels.P_FROZEN1], p[kernels.P_FROZEN2] = g.frozen_theta
    else:
        p[kernels.P_C1] = g.c1
        p[kernels.P_C2] = g.c2
        p[kernels.P_BAR1], p[kernels.P_BAR2] = g.theta_bar
        p[kernels.P_TRUE_REGRESSOR] = g.regressor_velocity == "true"
        p[kernels.P_TRUE_INNOVATION] = g.innovation_position == "true"
        p[kernels.P_ADAPTED] = g.adapted_feedforward
    return p


###########################
# Runner                  #
###########################


class ScenarioRunner:
    """
    Runs one scenario. The simulation happens on first access to `log` or `metrics` (or an
    explicit call to `run`) and the results are cached.

    Numerical failures (a non-finite state, a state beyond the divergence bound, or a
    covariance that lost positive-definiteness) stop the run. They are logged, recorded in
    Metrics.diverged, and re-raised only when `raise_on_failure` is set.
    """

    __slots__ = ("_cfg", "_log", "_metrics", "_raise_on_failure")

    def __init__(self, cfg: ScenarioConfig, raise_on_failure: bool = False):
        """
        Args:
            cfg (ScenarioConfig): A validated scenario.
            raise_on_failure (bool): Re-raise NumericalBlowup / CovarianceDegenerate after
                recording them.
        """
        self._cfg: ScenarioConfig = cfg
        self._log: Optional[RunLog] = None
        self._metrics: Optional[Metrics] = None
        self._raise_on_failure = raise_on_failure

    @property
    def config(self) -> ScenarioConfig:
        """
        The scenario being simulated.

        Returns:
            ScenarioConfig: The configuration.
        """
        return self._cfg

    @config.setter
    def config(self, _):
        raise ImmutablePropertyError("Property config is immutable.")

    @property
    def log(self) -> RunLog:
        """
        The decimated signal table. Runs the simulation if needed.

        Returns:
            RunLog: The log.
        """
        if self._log is None:
            self.run()
        return self._log

    @log.setter
    def log(self, _):
        raise ImmutablePropertyError("Property log is immutable.")

    @property
    def metrics(self) -> Metrics:
        """
        The summary metrics. Runs the simulation if needed.

        Returns:
            Metrics: The metrics.
        """
        if self._metrics is None:
            self.run()
        return self._metrics

    @metrics.setter
    def metrics(self, _):
        raise ImmutablePropertyError("Property metrics is immutable.")

    def run(self) -> Tuple[RunLog, Metrics]:
        """
        Simulate the scenario, unless it has been simulated already.

        Returns:
            Tuple[RunLog, Metrics]: The log and the metrics.
        """
        if self._log is not None:
            return self._log, self._metrics

        cfg = self._cfg
        integ = cfg.integrator
        n_steps = integ.n_steps
        h = integ.step_h
        dec = cfg.decimation
        window, tv_window = cfg.metrics.windows(integ.t_end)
        iandi = cfg.observer == IANDI
        names = IANDI_STATE if iandi else SM_STATE
        internal = IANDI_INTERNALS if iandi else SM_INTERNALS
        columns = iandi_columns() if iandi else sm_columns()

        channel = MeasurementChannel(cfg.noise, cfg.seed, h, n_steps)
        x0 = _initial_state(cfg)
        check_finite(x0, names, 0.0)
        p = _parameters(cfg)
        starts, bases, slopes = cfg.reference.arrays

        n_rows = n_steps // dec + 1
        data = np.empty((n_rows, len(columns)))
        internals = np.empty((n_rows, len(internal)))

        log.info(
            "Running '%s': %s observer, %d %s steps of %gs",
            cfg.run_label,
            cfg.observer,
            n_steps,
            integ.method.value,
            h,
        )
        started = time.perf_counter()
        status, fail_t, diag, row, x, aux, stats = kernels.run_loop(
            kernels.IANDI_KIND if iandi else kernels.SLIDING_MODE_KIND,
            x0,
            p,
            starts,
            bases,
            slopes,
            channel.draws,
            channel.steps_per_sample,
            n_steps,
            h,
            integ.method is IntegrationMethod.RK4,
            dec,
            cfg.metrics.divergence_bound,
            window[0],
            window[1],
            tv_window[0],
            cfg.metrics.settle_tolerance,
            data,
            internals,
        )

        failure: Optional[FrictionObserverError] = None
        if status in (kernels.NON_FINITE, kernels.OUT_OF_BOUND):
            failure = NumericalBlowup(fail_t, names[int(diag[0])], float(diag[1]))
        elif status == kernels.COVARIANCE:
            failure = CovarianceDegenerate(fail_t, tuple(map(tuple, diag.reshape(2, 2).tolist())))
        if failure is not None:
            log.warning("Run '%s' diverged: %s", cfg.run_label, failure)

        if iandi:
            theta_hat = (aux[kernels.A_THETA1], aux[kernels.A_THETA2])
        else:
            theta_hat = (x[4] + p[kernels.P_BAR1], x[5] + p[kernels.P_BAR2])
        theta_error = (
            float(theta_hat[0]) - cfg.plant_params.theta1,
            float(theta_hat[1]) - cfg.plant_params.theta2,
        )
        self._metrics = _finish_metrics(
            stats,
            window,
            tv_window,
            theta_error,
            None if failure is None else float(fail_t),
            None if failure is None else str(failure),
        )
        self._log = RunLog(
            columns,
            data[:row],
            decimation=dec,
            meta={
                "label": cfg.run_label,
                "observer": cfg.observer,
                "theta1": cfg.plant_params.theta1,
                "theta2": cfg.plant_params.theta2,
                "step_h": h,
                "seed": cfg.seed,
            },
            extras={name: internals[:row, i].copy() for i, name in enumerate(internal)},
        )
        log.info(
            "Finished '%s' in %.2fs (%d logged rows)",
            cfg.run_label,
            time.perf_counter() - started,
            row,
        )
        if failure is not None and self._raise_on_failure:
            raise failure
        return self._log, self._metrics


def run_scenario(cfg: ScenarioConfig, raise_on_failure: bool = False) -> Tuple[RunLog, Metrics]:
    """
    Simulate one scenario.

    Args:
        cfg (ScenarioConfig): The scenario.
        raise_on_failure (bool): Re-raise numerical failures after recording them.

    Returns:
        Tuple[RunLog, Metrics]: Decimated log and full-grid metrics. Identical configurations
        give bit-identical logs.
    """
    return ScenarioRunner(cfg, raise_on_failure=raise_on_failure).run()


###########################
# Experiment helpers      #
###########################


def total_variation(series: Sequence[float]) -> float:
    """
    Sum of absolute successive differences of a sampled signal; the chattering index.

    Args:
        series (Sequence[float]): At least two samples.

    Raises:
        InvalidInput: If fewer than two samples are given.

    Returns:
        float: The total variation.
    """
    values = np.asarray(series, dtype=float).reshape(-1)
    if values.size < 2:
        raise InvalidInput("Total variation needs at least two samples, got %d." % values.size)
    return float(np.sum(np.abs(np.diff(values))))


def lyapunov_rate(k1: float, p: PlantParams) -> float:
    """
    Coefficient of the decay bound H' <= -rate * x2_tilde**2 of the I&I observer's energy
    function, vartheta**2 * (k1 + theta1 + theta2 * vartheta).

    Args:
        k1 (float): Observer gain, > 0.
        p (PlantParams): Plant constants.

    Returns:
        float: The rate.
    """
    if not k1 > 0:
        raise InvalidInput(f"k1 must be strictly positive, got {k1}.")
    return p.vartheta**2 * (k1 + p.theta1 + p.theta2 * p.vartheta)


@dataclass(frozen=True)
class SweepRow:
    """One k1 value of a gain sweep."""

    k1: float
    noisy: bool
    stable: bool
    rms_tracking_error: float
    max_observer_error: float
    tv_u: float
    diverged_at: Optional[float]
    error: Optional[str] = None


def _sweep_config(base: ScenarioConfig, k1: float, noisy: bool) -> ScenarioConfig:
    gains = base.observer_gains if isinstance(base.observer_gains, IandIConfig) else IandIConfig()
    if noisy:
        amplitude = base.noise.amplitude if base.noise.amplitude > 0 else BENCHMARK_NOISE_AMPLITUDE
    else:
        amplitude = 0.0
    return replace(
        base,
        observer=IANDI,
        observer_gains=replace(gains, k1=k1),
        noise=replace(base.noise, amplitude=amplitude),
        label=f"I&I k1={k1:g}",
    )


def _sweep_run(cfg: ScenarioConfig) -> Tuple[Optional[Metrics], Optional[str]]:
    try:
        return ScenarioRunner(cfg).metrics, None
    except FrictionObserverError as err:
        return None, str(err)


def _verdict(metrics: Metrics, threshold: float) -> bool:
    return not metrics.diverged and metrics.max_observer_error <= threshold


def k1_sweep(
    values: Sequence[float],
    noisy: bool,
    base: ScenarioConfig,
    threshold: Optional[float] = None,
    workers: Optional[int] = None,
) -> List[SweepRow]:
    """
    Run the I&I closed loop once per observer gain and classify each run.

    A run is degraded if it diverged, failed, or its max post-transient observer error exceeds
    `threshold`. Runs are independent and share the base configuration and seed, so the table
    is the same whether it is computed serially or on a process pool; rows follow `values`.

    Args:
        values (Sequence[float]): Gains k1 to try.
        noisy (bool): Use the base noise amplitude (or the default 3e-4 if the base is
            noise-free); otherwise run noise-free.
        base (ScenarioConfig): Shared settings.
        threshold (Optional[float]): Degradation threshold; defaults to
            base.metrics.degraded_threshold.
        workers (Optional[int]): Worker processes. 1 runs serially; None lets the pool decide.

    Returns:
        List[SweepRow]: One row per value, never aborting on a failing run.
    """
    threshold = base.metrics.degraded_threshold if threshold is None else threshold
    configs: List[Optional[ScenarioConfig]] = []
    results: Dict[int, Tuple[Optional[Metrics], Optional[str]]] = {}
    for i, k1 in enumerate(values):
        try:
            configs.append(_sweep_config(base, k1, noisy))
        except ConfigError as err:
            configs.append(None)
            results[i] = (None, str(err))
            log.warning("Sweep value k1=%s rejected: %s", k1, err)

    pending = [(i, c) for i, c in enumerate(configs) if c is not None]
    if workers == 1 or len(pending) <= 1:
        outcomes = [_sweep_run(c) for _, c in pending]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_sweep_run, [c for _, c in pending]))
    for (i, _), outcome in zip(pending, outcomes):
        results[i] = outcome

    rows = []
    nan = float("nan")
    for i, k1 in enumerate(values):
        metrics, error = results[i]
        if metrics is None:
            rows.append(SweepRow(k1, noisy, False, nan, nan, nan, None, error))
            continue
        stable = _verdict(metrics, threshold)
        rows.append(
            SweepRow(
                k1=k1,
                noisy=noisy,
                stable=stable,
                rms_tracking_error=metrics.rms_tracking_error,
                max_observer_error=metrics.max_observer_error,
                tv_u=metrics.control_total_variation,
                diverged_at=metrics.diverged_at,
                error=metrics.error,
            )
        )
        log.info("Sweep k1=%g: %s", k1, "stable" if stable else "degraded")
    return rows
