"""
YAML scenario files.

Every key is optional and omitted keys take the default benchmark values. Unknown keys are
rejected at every level with a ConfigError naming the dotted path, so a typo never silently
falls back to a default. Numbers may be written as strings ("1e-4"), which YAML would
otherwise keep as text.

`dump_config` writes a complete document that `parse_config_text` reads back into an equal
ScenarioConfig. The schema is documented in doc/Configuration.rst.
"""

import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple, Union

import yaml

from friction_observers.controller import ControllerGains
from friction_observers.exception import ConfigError
from friction_observers.integrate import IntegratorConfig, SignMode
from friction_observers.plant import PlantParams, PlantState
from friction_observers.reference import HOLD, PiecewiseReference, Segment
from friction_observers.scenario import (
    IANDI,
    OBSERVERS,
    SLIDING_MODE,
    IandIConfig,
    MetricsConfig,
    NoiseConfig,
    ScenarioConfig,
    SlidingModeConfig,
)

log: logging.Logger = logging.getLogger(__name__)

TOP_LEVEL_KEYS = (
    "observer",
    "controller",
    "duration",
    "seed",
    "label",
    "plant",
    "gains",
    IANDI,
    SLIDING_MODE,
    "integrator",
    "noise",
    "noise_amplitude",
    "measurement_rate",
    "initial",
    "reference",
    "logging",
    "metrics",
)

SECTION_KEYS = {
    "plant": ("theta1", "theta2", "vartheta"),
    "gains": ("alpha1", "alpha2"),
    IANDI: ("k1", "x2I", "theta1I", "theta2I", "frozen_theta"),
    SLIDING_MODE: (
        "c1",
        "c2",
        "gamma0",
        "theta_bar",
        "x1_hat",
        "x2_hat",
        "delta_theta_hat",
        "regressor_velocity",
        "innovation_position",
        "adapted_feedforward",
    ),
    "integrator": ("method", "step", "sign_mode", "boundary_layer"),
    "noise": ("amplitude", "rate", "model"),
    "initial": ("x1", "x2"),
    "logging": ("decimation",),
    "metrics": (
        "window_start",
        "window_end",
        "tv_window_start",
        "settle_tolerance",
        "divergence_bound",
        "degraded_threshold",
    ),
}

SEGMENT_KEYS = ("t_start", "kind", "value", "value_from", "value_to")


###########################
# Scalar coercion         #
###########################


def _number(value: Any, path: str) -> float:
    if isinstance(value, bool):
        raise ConfigError(path, "expected a number, got a boolean")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            return float(value.strip())
        except ValueError:
            pass
    raise ConfigError(path, f"expected a number, got {value!r}")


def _integer(value: Any, path: str) -> int:
    if isinstance(value, bool):
        raise ConfigError(path, "expected an integer, got a boolean")
    if isinstance(value, int):
        return value
    if isinstance(value, str):
        try:
            return int(value.strip())
        except ValueError:
            pass
    if isinstance(value, float) and value.is_integer():
        return int(value)
    raise ConfigError(path, f"expected an integer, got {value!r}")


def _boolean(value: Any, path: str) -> bool:
    if isinstance(value, bool):
        return value
    if isinstance(value, str) and value.strip().lower() in ("true", "false"):
        return value.strip().lower() == "true"
    raise ConfigError(path, f"expected true or false, got {value!r}")


def _text(value: Any, path: str) -> str:
    if not isinstance(value, str):
        raise ConfigError(path, f"expected a string, got {value!r}")
    return value


def _vector(value: Any, path: str, length: int = 2) -> Tuple[float, ...]:
    if not isinstance(value, (list, tuple)) or len(value) != length:
        raise ConfigError(path, f"expected a list of {length} numbers")
    return tuple(_number(v, f"{path}[{i}]") for i, v in enumerate(value))


def _matrix(value: Any, path: str) -> Tuple[Tuple[float, float], Tuple[float, float]]:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ConfigError(path, "expected a 2x2 matrix")
    return tuple(_vector(row, f"{path}[{i}]") for i, row in enumerate(value))


def _section(data: Mapping[str, Any], name: str) -> Dict[str, Any]:
    section = data.get(name)
    if section is None:
        return {}
    if not isinstance(section, dict):
        raise ConfigError(name, "expected a mapping")
    _reject_unknown(section, SECTION_KEYS[name], name)
    return section


def _reject_unknown(data: Mapping[str, Any], allowed, prefix: str = "") -> None:
    for key in data:
        if key not in allowed:
            path = f"{prefix}.{key}" if prefix else str(key)
            raise ConfigError(path, "unknown key")


###########################
# Sections                #
###########################


def _plant(data) -> PlantParams:
    s = _section(data, "plant")
    return PlantParams(**{k: _number(v, f"plant.{k}") for k, v in s.items()})


def _gains(data) -> ControllerGains:
    s = _section(data, "gains")
    return ControllerGains(**{k: _number(v, f"gains.{k}") for k, v in s.items()})


def _iandi(data) -> IandIConfig:
    s = _section(data, IANDI)
    kwargs: Dict[str, Any] = {}
    for key, value in s.items():
        path = f"{IANDI}.{key}"
        if key == "frozen_theta":
            kwargs[key] = None if value is None else _vector(value, path)
        else:
            kwargs[key] = _number(value, path)
    return IandIConfig(**kwargs)


def _sliding_mode(data) -> SlidingModeConfig:
    s = _section(data, SLIDING_MODE)
    kwargs: Dict[str, Any] = {}
    for key, value in s.items():
        path = f"{SLIDING_MODE}.{key}"
        if key == "gamma0":
            kwargs[key] = _matrix(value, path)
        elif key == "theta_bar":
            kwargs[key] = _vector(value, path)
        elif key == "delta_theta_hat":
            kwargs[key] = None if value is None else _vector(value, path)
        elif key in ("regressor_velocity", "innovation_position"):
            kwargs[key] = _text(value, path)
        elif key == "adapted_feedforward":
            kwargs[key] = _boolean(value, path)
        else:
            kwargs[key] = _number(value, path)
    return SlidingModeConfig(**kwargs)


def _integrator(data) -> IntegratorConfig:
    s = _section(data, "integrator")
    kwargs: Dict[str, Any] = {}
    if "method" in s:
        kwargs["method"] = _text(s["method"], "integrator.method").lower()
    if "step" in s:
        kwargs["step_h"] = _number(s["step"], "integrator.step")
    if "duration" in data:
        kwargs["t_end"] = _number(data["duration"], "duration")
    kind = _text(s.get("sign_mode", "exact"), "integrator.sign_mode")
    if kind == "boundary_layer":
        if "boundary_layer" not in s:
            raise ConfigError("integrator.boundary_layer", "required with sign_mode boundary_layer")
        kwargs["sign_mode"] = SignMode.boundary_layer(
            _number(s["boundary_layer"], "integrator.boundary_layer")
        )
    else:
        if "boundary_layer" in s:
            raise ConfigError(
                "integrator.boundary_layer", "only valid with sign_mode boundary_layer"
            )
        kwargs["sign_mode"] = SignMode(kind)
    return IntegratorConfig(**kwargs)


def _noise(data) -> NoiseConfig:
    s = dict(_section(data, "noise"))
    for flat, key in (("noise_amplitude", "amplitude"), ("measurement_rate", "rate")):
        if flat in data:
            if key in s:
                raise ConfigError(flat, f"given both as '{flat}' and as 'noise.{key}'")
            s[key] = data[flat]
    kwargs: Dict[str, Any] = {}
    if "amplitude" in s:
        kwargs["amplitude"] = _number(s["amplitude"], "noise_amplitude")
    if "rate" in s:
        kwargs["rate"] = _number(s["rate"], "noise.rate")
    if "model" in s:
        kwargs["model"] = _text(s["model"], "noise.model")
    return NoiseConfig(**kwargs)


def _initial(data) -> PlantState:
    s = _section(data, "initial")
    default = ScenarioConfig.__dataclass_fields__["initial"].default
    return PlantState(
        _number(s.get("x1", default.x1), "initial.x1"),
        _number(s.get("x2", default.x2), "initial.x2"),
    )


def _reference(data) -> Optional[PiecewiseReference]:
    if data.get("reference") is None:
        return None
    items = data["reference"]
    if not isinstance(items, list) or not items:
        raise ConfigError("reference", "expected a non-empty list of segments")
    segments: List[Segment] = []
    for i, item in enumerate(items):
        path = f"reference[{i}]"
        if not isinstance(item, dict):
            raise ConfigError(path, "expected a mapping")
        _reject_unknown(item, SEGMENT_KEYS, path)
        if "t_start" not in item:
            raise ConfigError(f"{path}.t_start", "missing")
        kwargs: Dict[str, Any] = {"kind": _text(item.get("kind", HOLD), f"{path}.kind")}
        for key in ("t_start", "value", "value_from", "value_to"):
            if key in item and item[key] is not None:
                kwargs[key] = _number(item[key], f"{path}.{key}")
        segments.append(Segment(**kwargs))
    return PiecewiseReference(segments)


def _metrics(data) -> MetricsConfig:
    s = _section(data, "metrics")
    kwargs = {
        key: None if value is None else _number(value, f"metrics.{key}")
        for key, value in s.items()
    }
    return MetricsConfig(**kwargs)


def _observer(data) -> str:
    if "observer" in data:
        observer = _text(data["observer"], "observer")
    elif SLIDING_MODE in data and IANDI not in data:
        observer = SLIDING_MODE
    else:
        observer = IANDI
    if observer not in OBSERVERS:
        raise ConfigError("observer", f"unknown observer '{observer}'")
    other = SLIDING_MODE if observer == IANDI else IANDI
    if other in data:
        raise ConfigError(other, f"section belongs to observer '{other}', not '{observer}'")
    return observer


###########################
# Public functions        #
###########################


def config_from_dict(data: Optional[Mapping[str, Any]]) -> ScenarioConfig:
    """
    Build a validated ScenarioConfig from parsed YAML.

    Args:
        data (Optional[Mapping[str, Any]]): The document. None or {} gives the defaults.

    Raises:
        ConfigError: On an unknown key, a malformed value or a violated invariant.

    Returns:
        ScenarioConfig: The scenario.
    """
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("config", "the document must be a mapping")
    _reject_unknown(data, TOP_LEVEL_KEYS)

    observer = _observer(data)
    kwargs: Dict[str, Any] = {
        "observer": observer,
        "plant_params": _plant(data),
        "gains": _gains(data),
        "observer_gains": _iandi(data) if observer == IANDI else _sliding_mode(data),
        "integrator": _integrator(data),
        "noise": _noise(data),
        "initial": _initial(data),
        "metrics": _metrics(data),
    }
    if "controller" in data:
        kwargs["controller"] = _text(data["controller"], "controller")
    if "seed" in data:
        kwargs["seed"] = _integer(data["seed"], "seed")
    if "label" in data and data["label"] is not None:
        kwargs["label"] = _text(data["label"], "label")
    decimation = _section(data, "logging").get("decimation")
    if decimation is not None:
        kwargs["decimation"] = _integer(decimation, "logging.decimation")
    reference = _reference(data)
    if reference is not None:
        kwargs["reference"] = reference
    return ScenarioConfig(**kwargs)


def parse_config_text(text: str) -> ScenarioConfig:
    """
    Parse a YAML document into a ScenarioConfig.

    Args:
        text (str): YAML source.

    Raises:
        ConfigError: On invalid YAML or an invalid scenario.

    Returns:
        ScenarioConfig: The scenario.
    """
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as err:
        raise ConfigError("config", f"invalid YAML: {err}") from err
    return config_from_dict(data)


def parse_config(path: Union[str, Path]) -> ScenarioConfig:
    """
    Read a YAML scenario file.

    Args:
        path (Union[str, Path]): The file.

    Raises:
        ConfigError: If the file cannot be read or does not describe a valid scenario.

    Returns:
        ScenarioConfig: The scenario, with defaults for every omitted key.
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as err:
        raise ConfigError("config", f"cannot read '{path}': {err.strerror or err}") from err
    cfg = parse_config_text(text)
    log.info("Loaded scenario '%s' from %s", cfg.run_label, path)
    return cfg


def default_config(observer: str = IANDI) -> ScenarioConfig:
    """
    The default benchmark scenario: noise-free, 150 s at h = 1e-4 with RK4.

    Args:
        observer (str): `iandi` or `slidingmode`.

    Returns:
        ScenarioConfig: The scenario.
    """
    return ScenarioConfig(observer=observer)


def _finite_or_none(value: Optional[float]) -> Optional[float]:
    if value is None or not math.isfinite(value):
        return None
    return float(value)


def config_to_dict(cfg: ScenarioConfig) -> Dict[str, Any]:
    """
    A plain-data rendering of a ScenarioConfig, using the YAML schema's keys.

    Args:
        cfg (ScenarioConfig): The scenario.

    Returns:
        Dict[str, Any]: Nested dicts and lists of builtin scalars.
    """
    p = cfg.plant_params
    integ = cfg.integrator
    data: Dict[str, Any] = {
        "observer": cfg.observer,
        "controller": cfg.controller,
        "label": cfg.label,
        "duration": float(integ.t_end),
        "seed": int(cfg.seed),
        "plant": {"theta1": p.theta1, "theta2": p.theta2, "vartheta": p.vartheta},
        "gains": {"alpha1": cfg.gains.alpha1, "alpha2": cfg.gains.alpha2},
    }
    g = cfg.observer_gains
    if cfg.observer == IANDI:
        section: Dict[str, Any] = {
            "k1": g.k1,
            "x2I": g.x2I,
            "theta1I": g.theta1I,
            "theta2I": g.theta2I,
        }
        if g.frozen_theta is not None:
            section["frozen_theta"] = list(g.frozen_theta)
        data[IANDI] = section
    else:
        section = {
            "c1": g.c1,
            "c2": g.c2,
            "gamma0": [list(row) for row in g.gamma0],
            "theta_bar": list(g.theta_bar),
            "x1_hat": g.x1_hat,
            "x2_hat": g.x2_hat,
            "regressor_velocity": g.regressor_velocity,
            "innovation_position": g.innovation_position,
            "adapted_feedforward": bool(g.adapted_feedforward),
        }
        if g.delta_theta_hat is not None:
            section["delta_theta_hat"] = list(g.delta_theta_hat)
        data[SLIDING_MODE] = section

    integrator: Dict[str, Any] = {
        "method": integ.method.value,
        "step": integ.step_h,
        "sign_mode": integ.sign_mode.kind,
    }
    if integ.sign_mode.kind == "boundary_layer":
        integrator["boundary_layer"] = integ.sign_mode.eps
    data["integrator"] = integrator
    data["noise"] = {
        "amplitude": cfg.noise.amplitude,
        "rate": cfg.noise.rate,
        "model": cfg.noise.model,
    }
    data["initial"] = {"x1": cfg.initial.x1, "x2": cfg.initial.x2}
    segments = []
    for seg in cfg.reference.segments:
        item: Dict[str, Any] = {"t_start": seg.t_start, "kind": seg.kind}
        if seg.kind == HOLD:
            item["value"] = seg.value
        else:
            item["value_from"] = seg.value_from
            item["value_to"] = seg.value_to
        segments.append(item)
    data["reference"] = segments
    data["logging"] = {"decimation": int(cfg.decimation)}
    m = cfg.metrics
    metrics: Dict[str, Any] = {}
    for key in ("window_start", "window_end", "tv_window_start"):
        value = _finite_or_none(getattr(m, key))
        if value is not None:
            metrics[key] = value
    metrics.update(
        settle_tolerance=m.settle_tolerance,
        divergence_bound=m.divergence_bound,
        degraded_threshold=m.degraded_threshold,
    )
    data["metrics"] = metrics
    return data


def dump_config(cfg: ScenarioConfig) -> str:
    """
    Render a ScenarioConfig as a complete YAML document.

    Args:
        cfg (ScenarioConfig): The scenario.

    Returns:
        str: YAML text that parses back into an equal ScenarioConfig.
    """
    return yaml.safe_dump(config_to_dict(cfg), sort_keys=False, default_flow_style=None)
