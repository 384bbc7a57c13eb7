import math

import numpy as np
import pytest

from friction_observers.exception import ConfigError
from friction_observers.integrate import IntegratorConfig, StateVector, integrate_step
from friction_observers.plant import PlantParams, PlantState, friction_force, plant_deriv


def test_friction_force_values(params):
    assert friction_force(0.0, params) == 0.0
    assert friction_force(0.5, params) == pytest.approx(1.2, abs=1e-12)
    assert friction_force(-0.5, params) == pytest.approx(-1.2, abs=1e-12)


def test_friction_force_is_odd_and_increasing(params):
    grid = np.linspace(-2.0, 2.0, 4001)
    forces = np.array([friction_force(v, params) for v in grid])
    assert (np.diff(forces) > 0).all()
    for v in (0.001, 0.01, 0.3, 1.7):
        assert friction_force(-v, params) == -friction_force(v, params)


def test_plant_deriv(params):
    assert plant_deriv(PlantState(0.0, 0.0), 0.0, params) == (0.0, 0.0)
    d = plant_deriv(PlantState(0.1, 0.5), 0.0, params)
    assert d.x1 == 0.5
    assert d.x2 == pytest.approx(-1.2, abs=1e-12)


def test_exact_cancellation(params):
    for x2 in (-1.0, -0.01, 0.0, 0.02, 3.0):
        u = friction_force(x2, params)
        assert plant_deriv(PlantState(0.3, x2), u, params).x2 == 0.0


def test_unforced_velocity_magnitude_never_grows(params):
    cfg = IntegratorConfig(step_h=1e-4, t_end=0.2)

    def field(t, x):
        return plant_deriv(PlantState(x["x1"], x["x2"]), 0.0, params)

    x = StateVector(["x1", "x2"], [0.1, 0.5])
    previous = abs(x["x2"])
    for n in range(cfg.n_steps):
        x = integrate_step(field, x, cfg.time_at(n), cfg)
        assert abs(x["x2"]) <= previous + cfg.step_h**2
        previous = abs(x["x2"])


@pytest.mark.parametrize("name", ["theta1", "theta2", "vartheta"])
def test_params_must_be_positive(name):
    with pytest.raises(ConfigError) as info:
        PlantParams(**{name: 0.0})
    assert info.value.field == f"plant.{name}"
    with pytest.raises(ConfigError):
        PlantParams(**{name: math.inf})


def test_default_params_match_the_benchmark():
    assert PlantParams().theta == (0.4, 1.0)
    assert PlantParams().vartheta == 100.0
