"""
Reusable fixtures for testing. All fixtures in this repo will be available in all test modules
without explicit importing.

Closed-loop fixtures use a coarse step and a short horizon so the default test run stays fast.
Full-length runs live in test_acceptance.py and carry the `slow` marker.
"""

import pytest

from friction_observers.controller import ControllerGains
from friction_observers.integrate import IntegratorConfig
from friction_observers.plant import PlantParams, PlantState
from friction_observers.reference import PiecewiseReference, Segment
from friction_observers.scenario import (
    IandIConfig,
    NoiseConfig,
    ScenarioConfig,
)

SHORT_STEP = 1e-3
SHORT_DURATION = 2.0


@pytest.fixture
def params():
    return PlantParams(theta1=0.4, theta2=1.0, vartheta=100.0)


@pytest.fixture
def gains():
    return ControllerGains(alpha1=0.49, alpha2=1.4)


@pytest.fixture
def short_integrator():
    return IntegratorConfig(step_h=SHORT_STEP, t_end=SHORT_DURATION)


@pytest.fixture
def iandi_cfg(short_integrator):
    """The default I&I loop, two seconds long, logged every 10 ms."""
    return ScenarioConfig(observer="iandi", integrator=short_integrator, decimation=10)


@pytest.fixture
def sm_cfg(short_integrator):
    """The default sliding mode loop, two seconds long, logged every 10 ms."""
    return ScenarioConfig(observer="slidingmode", integrator=short_integrator, decimation=10)


@pytest.fixture
def noisy_iandi_cfg(iandi_cfg):
    return ScenarioConfig(
        observer="iandi",
        integrator=iandi_cfg.integrator,
        decimation=iandi_cfg.decimation,
        noise=NoiseConfig(amplitude=3e-4),
        seed=7,
    )


@pytest.fixture
def known_parameter_cfg(params):
    """
    I&I loop with the parameter estimates pinned to the true values over ten seconds. The
    velocity estimate starts 0.4 below the true velocity.
    """
    return ScenarioConfig(
        observer="iandi",
        observer_gains=IandIConfig(k1=1.0, frozen_theta=params.theta),
        integrator=IntegratorConfig(step_h=SHORT_STEP, t_end=10.0),
        initial=PlantState(0.1, 0.5),
        decimation=1,
    )


@pytest.fixture
def hold_reference():
    return PiecewiseReference([Segment(0.0, "hold", value=1.0)])

