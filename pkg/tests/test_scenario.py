from dataclasses import replace

import numpy as np
import pytest

from friction_observers.controller import nominal_error_response
from friction_observers.exception import (
    ConfigError,
    ImmutablePropertyError,
    InvalidInput,
    NumericalBlowup,
)
from friction_observers.integrate import IntegrationMethod, IntegratorConfig
from friction_observers.observers import ii_outputs, IandIState
from friction_observers.plant import PlantParams
from friction_observers.runlog import iandi_columns, sm_columns
from friction_observers.scenario import (
    IandIConfig,
    MeasurementChannel,
    MetricsConfig,
    NoiseConfig,
    ScenarioConfig,
    ScenarioRunner,
    SlidingModeConfig,
    hold_steps,
    k1_sweep,
    lyapunov_rate,
    measure,
    run_scenario,
    total_variation,
)

DIRECTIONS = ((1.0, 0.0), (0.0, 1.0), (1.0, 1.0))


###########################
# Measurement             #
###########################


def test_measure():
    assert measure(0.37, 0.8, 0.0) == 0.37
    assert measure(1.0, 1.0, 3e-4) == pytest.approx(1.0003)
    assert measure(0.0, -0.9, 3e-4) == 0.0
    assert measure(1.0, 1.0, 3e-4, model="additive") == pytest.approx(1.0003)
    assert measure(0.0, 1.0, 3e-4, model="additive") == pytest.approx(3e-4)


def test_channel_holds_each_draw():
    channel = MeasurementChannel(NoiseConfig(amplitude=1e-3, rate=1000.0), 5, 1e-4, 100)
    assert channel.steps_per_sample == 10
    for sample in range(10):
        held = {channel.draw(sample * 10 + k) for k in range(10)}
        assert len(held) == 1
    assert channel.draw(0) != channel.draw(10)
    assert all(-1.0 <= channel.draw(n) <= 1.0 for n in range(101))


def test_channel_is_silent_without_noise():
    channel = MeasurementChannel(NoiseConfig(amplitude=0.0), 5, 1e-3, 50)
    assert {channel.draw(n) for n in range(51)} == {0.0}
    assert channel.measure(0.4, channel.draw(3)) == 0.4


def test_channel_is_seeded():
    noise = NoiseConfig(amplitude=1e-3, rate=500.0)
    a = MeasurementChannel(noise, 11, 1e-3, 40)
    b = MeasurementChannel(noise, 11, 1e-3, 40)
    c = MeasurementChannel(noise, 12, 1e-3, 40)
    assert [a.draw(n) for n in range(41)] == [b.draw(n) for n in range(41)]
    assert [a.draw(n) for n in range(41)] != [c.draw(n) for n in range(41)]
    with pytest.raises(ImmutablePropertyError):
        a.steps_per_sample = 3


###########################
# Configuration           #
###########################


def test_scenario_config_defaults():
    cfg = ScenarioConfig()
    assert cfg.observer == "iandi"
    assert cfg.observer_gains == IandIConfig(k1=1.0)
    assert tuple(cfg.initial) == (0.1, 0.5)
    assert cfg.integrator.step_h == 1e-4
    assert cfg.integrator.t_end == 150.0
    assert cfg.noise.amplitude == 0.0
    assert cfg.decimation == 10
    assert cfg.run_label == "I&I noise-free"
    sm = ScenarioConfig(observer="slidingmode", noise=NoiseConfig(amplitude=3e-4))
    assert sm.observer_gains == SlidingModeConfig()
    assert sm.run_label == "SM noisy"


def test_scenario_config_validation(short_integrator):
    with pytest.raises(ConfigError) as info:
        NoiseConfig(amplitude=-1.0)
    assert info.value.field == "noise_amplitude"
    with pytest.raises(ConfigError):
        ScenarioConfig(integrator=short_integrator, noise=NoiseConfig(rate=5000.0))
    with pytest.raises(ConfigError):
        ScenarioConfig(seed=-1)
    with pytest.raises(ConfigError):
        ScenarioConfig(seed=2**64)
    with pytest.raises(ConfigError):
        ScenarioConfig(observer="slidingmode", observer_gains=IandIConfig())
    with pytest.raises(ConfigError):
        ScenarioConfig(observer="kalman")
    with pytest.raises(ConfigError):
        ScenarioConfig(controller="pid")
    with pytest.raises(ConfigError):
        ScenarioConfig(decimation=0)
    with pytest.raises(ConfigError):
        ScenarioConfig(metrics=MetricsConfig(window_start=200.0))


def test_sliding_mode_config_validation():
    with pytest.raises(ConfigError):
        SlidingModeConfig(gamma0=((1.0, 2.0), (2.0, 1.0)))
    with pytest.raises(ConfigError):
        SlidingModeConfig(gamma0=((1.0, 0.5), (0.0, 1.0)))
    with pytest.raises(ConfigError):
        SlidingModeConfig(regressor_velocity="measured")
    with pytest.raises(ConfigError):
        SlidingModeConfig(innovation_position="estimate")
    assert SlidingModeConfig().initial_delta(0.1, 100.0) == pytest.approx((-0.7, -9.806852819))
    assert SlidingModeConfig(delta_theta_hat=(0.0, 0.0)).initial_delta(0.1, 100.0) == (0.0, 0.0)


def test_measurement_period_must_be_whole_steps():
    integrator = IntegratorConfig(step_h=1e-3, t_end=1.0)
    with pytest.raises(ConfigError) as info:
        ScenarioConfig(integrator=integrator, noise=NoiseConfig(rate=600.0))
    assert info.value.field == "noise.rate"
    cfg = ScenarioConfig(integrator=integrator, noise=NoiseConfig(rate=500.0))
    assert MeasurementChannel(cfg.noise, 0, 1e-3, 1000).steps_per_sample == 2
    assert hold_steps(1000.0, 1e-4) == 10
    assert hold_steps(250.0, 1e-4) == 40
    with pytest.raises(ConfigError):
        MeasurementChannel(NoiseConfig(rate=600.0), 0, 1e-3, 1000)


def test_degraded_threshold_default():
    assert MetricsConfig().degraded_threshold == 0.075


def test_metric_windows():
    assert MetricsConfig().windows(150.0) == ((75.0, 150.0), (100.0, 150.0))
    assert MetricsConfig().windows(2.0) == ((1.0, 2.0), (1.0, 2.0))
    custom = MetricsConfig(window_start=20.0, tv_window_start=90.0)
    assert custom.windows(150.0) == ((20.0, 150.0), (90.0, 150.0))


###########################
# Closed-loop runs        #
###########################


def test_iandi_log_layout(iandi_cfg):
    log, metrics = run_scenario(iandi_cfg)
    assert log.columns == iandi_columns()
    assert "x1_hat" not in log
    assert len(log) == 201
    assert log.decimation == 10
    assert np.allclose(np.diff(log["t"]), 0.01, atol=1e-12)
    assert log["t"][0] == 0.0
    assert log["t"][-1] == pytest.approx(2.0)
    assert not metrics.diverged
    assert metrics.window == (1.0, 2.0)
    assert set(log.extras) == {"x2I", "theta1I", "theta2I"}


def test_iandi_output_map_is_algebraic(noisy_iandi_cfg):
    log, _ = run_scenario(noisy_iandi_cfg)
    extras = log.extras
    k1 = noisy_iandi_cfg.observer_gains.k1
    assert np.array_equal(log["x2_hat"], extras["x2I"] + k1 * log["y"])
    assert not np.array_equal(log["y"], log["x1"])
    for i in (0, 57, 200):
        state = IandIState(extras["x2I"][i], extras["theta1I"][i], extras["theta2I"][i], k1)
        out = ii_outputs(state, log["y"][i], 100.0)
        assert (log["theta1_hat"][i], log["theta2_hat"][i]) == (out.theta1_hat, out.theta2_hat)


def test_initial_row(iandi_cfg):
    log, _ = run_scenario(iandi_cfg)
    row = dict(zip(log.columns, log.data[0]))
    assert row["x1"] == 0.1
    assert row["x2"] == 0.5
    assert row["y"] == 0.1
    assert row["r"] == 1.0
    assert row["x2_hat"] == pytest.approx(0.1)
    assert row["theta1_hat"] == pytest.approx(-0.5)
    assert row["u"] == pytest.approx(-9.0558528, abs=1e-6)
    assert row["u_star"] == pytest.approx(0.941)


def test_runs_are_deterministic(noisy_iandi_cfg):
    first, m1 = run_scenario(noisy_iandi_cfg)
    second, m2 = run_scenario(noisy_iandi_cfg)
    assert np.array_equal(first.data, second.data)
    assert m1 == m2


def test_noise_free_runs_ignore_the_seed(iandi_cfg):
    a, _ = run_scenario(replace(iandi_cfg, seed=0))
    b, _ = run_scenario(replace(iandi_cfg, seed=2**64 - 1))
    assert np.array_equal(a.data, b.data)
    assert np.array_equal(a["y"], a["x1"])


def test_seed_changes_noisy_runs(noisy_iandi_cfg):
    a, _ = run_scenario(noisy_iandi_cfg)
    b, _ = run_scenario(replace(noisy_iandi_cfg, seed=8))
    assert not np.array_equal(a["y"], b["y"])


def test_additive_noise_model(noisy_iandi_cfg):
    cfg = replace(noisy_iandi_cfg, noise=replace(noisy_iandi_cfg.noise, model="additive"))
    log, _ = run_scenario(cfg)
    assert np.max(np.abs(log["y"] - log["x1"])) <= 3e-4 + 1e-15
    assert np.max(np.abs(log["y"] - log["x1"])) > 1e-4


def test_known_parameters_give_monotone_convergence(known_parameter_cfg):
    log, metrics = run_scenario(known_parameter_cfg)
    error = np.abs(log["x2_hat"] - log["x2"])
    assert error[0] == pytest.approx(0.4)
    after_first_second = error[log["t"] >= 1.0]
    assert (np.diff(after_first_second) <= 1e-12).all()
    assert error[-1] < 1e-6
    assert not metrics.diverged
    assert log["theta1_hat"].tolist() == [0.4] * len(log)
    assert log["theta2_hat"].tolist() == [1.0] * len(log)


def test_ideal_controller_matches_closed_form(hold_reference):
    cfg = ScenarioConfig(
        controller="ideal",
        reference=hold_reference,
        integrator=IntegratorConfig(step_h=1e-3, t_end=10.0),
        decimation=100,
    )
    log, _ = run_scenario(cfg)
    e1 = log["x1"] - log["r"]
    expected = nominal_error_response(-0.9, 0.5, cfg.gains, log["t"])
    assert np.max(np.abs(e1 - expected)) < 1e-6


def test_settle_time(hold_reference):
    cfg = ScenarioConfig(
        controller="ideal",
        reference=hold_reference,
        integrator=IntegratorConfig(step_h=1e-3, t_end=15.0),
        decimation=100,
    )
    metrics = ScenarioRunner(cfg).metrics
    # |(-0.9 - 0.13 t) exp(-0.7 t)| drops below 0.02 between 6 and 7 seconds
    assert 6.0 < metrics.settle_time < 7.0


def test_never_settling_run_has_no_settle_time(iandi_cfg):
    metrics = ScenarioRunner(iandi_cfg).metrics
    assert metrics.settle_time is None


def test_sliding_mode_log_layout_and_covariance(sm_cfg):
    log, _ = run_scenario(sm_cfg)
    assert log.columns == sm_columns()
    assert "x1_hat" in log
    assert log["x1_hat"][0] == 0.0
    assert log["x2_hat"][0] == 0.1
    assert log["theta1_hat"][0] == pytest.approx(-0.5)
    assert log["theta2_hat"][0] == pytest.approx(-9.306852819)
    assert len(log) >= 2
    g = log.extras
    assert np.array_equal(g["gamma12"], g["gamma21"])
    assert (g["gamma11"] > 0).all()
    assert (g["gamma11"] * g["gamma22"] - g["gamma12"] * g["gamma21"] > 0).all()
    for v1, v2 in DIRECTIONS:
        quad = v1 * v1 * g["gamma11"] + 2 * v1 * v2 * g["gamma12"] + v2 * v2 * g["gamma22"]
        assert (np.diff(quad) <= 1e-9).all()


def test_sliding_mode_ablations_change_the_run(sm_cfg):
    base, _ = run_scenario(sm_cfg)
    for option in (
        {"regressor_velocity": "estimate"},
        {"adapted_feedforward": False},
    ):
        gains = replace(sm_cfg.observer_gains, **option)
        log, _ = run_scenario(replace(sm_cfg, observer_gains=gains))
        assert log.columns == base.columns
        assert not np.array_equal(log.data, base.data)


def test_sliding_mode_defaults_to_adapted_feedforward():
    assert SlidingModeConfig().adapted_feedforward is True


def test_sliding_mode_observer_error_decays_on_a_hold(hold_reference):
    cfg = ScenarioConfig(
        observer="slidingmode",
        reference=hold_reference,
        integrator=IntegratorConfig(step_h=1e-4, t_end=20.0),
        decimation=100,
    )
    log, metrics = run_scenario(cfg)
    assert not metrics.diverged
    error = np.abs(log["x2_hat"] - log["x2"])
    early = error[log["t"] <= 1.0].max()
    late = error[log["t"] >= 15.0].max()
    assert error[0] == pytest.approx(0.4)
    assert late < early / 4


def test_sliding_mode_chatters_more_than_iandi(hold_reference):
    common = dict(
        reference=hold_reference,
        integrator=IntegratorConfig(step_h=1e-4, t_end=20.0),
        metrics=MetricsConfig(window_start=10.0, tv_window_start=10.0),
        decimation=100,
    )
    iandi = ScenarioRunner(ScenarioConfig(observer="iandi", **common)).metrics
    sm = ScenarioRunner(ScenarioConfig(observer="slidingmode", **common)).metrics
    assert not iandi.diverged and not sm.diverged
    assert sm.control_total_variation > iandi.control_total_variation


def test_innovation_ablation_under_noise(sm_cfg):
    noisy = replace(sm_cfg, noise=NoiseConfig(amplitude=3e-4), seed=3)
    measured, _ = run_scenario(noisy)
    gains = replace(sm_cfg.observer_gains, innovation_position="true")
    true_position, _ = run_scenario(replace(noisy, observer_gains=gains))
    assert np.array_equal(measured["y"][:1], true_position["y"][:1])
    assert not np.array_equal(measured["x1_hat"], true_position["x1_hat"])


def test_euler_runs(iandi_cfg):
    cfg = replace(
        iandi_cfg,
        integrator=replace(iandi_cfg.integrator, method=IntegrationMethod.EULER, step_h=1e-4),
    )
    log, metrics = run_scenario(cfg)
    assert len(log) == 2001
    assert not metrics.diverged


def test_divergence_is_recorded(iandi_cfg):
    cfg = replace(iandi_cfg, metrics=MetricsConfig(divergence_bound=0.2))
    log, metrics = run_scenario(cfg)
    assert metrics.diverged
    assert metrics.diverged_at == 0.0
    assert "x2" in metrics.error
    assert len(log) == 1
    with pytest.raises(NumericalBlowup) as info:
        run_scenario(cfg, raise_on_failure=True)
    assert info.value.component == "x2"


def test_runner_caches_results(iandi_cfg):
    runner = ScenarioRunner(iandi_cfg)
    assert runner.log is runner.log
    assert runner.metrics is runner.run()[1]
    assert runner.config is iandi_cfg
    with pytest.raises(ImmutablePropertyError):
        runner.log = None
    with pytest.raises(ImmutablePropertyError):
        runner.metrics = None
    with pytest.raises(ImmutablePropertyError):
        runner.config = None


def test_metrics_cover_the_full_grid(iandi_cfg):
    coarse = ScenarioRunner(replace(iandi_cfg, decimation=100)).metrics
    fine = ScenarioRunner(replace(iandi_cfg, decimation=1)).metrics
    assert coarse == fine


###########################
# Experiment helpers      #
###########################


def test_total_variation():
    assert total_variation([2.0, 2.0, 2.0]) == 0.0
    assert total_variation([0, 1, 0, 1]) == 3.0
    assert total_variation([0.5, 1.0, 4.0, 9.5]) == pytest.approx(9.0)
    with pytest.raises(InvalidInput):
        total_variation([1.0])
    with pytest.raises(InvalidInput):
        total_variation([])


def test_lyapunov_rate(params):
    assert lyapunov_rate(1.0, params) == pytest.approx(1.014e6)
    assert lyapunov_rate(1e-12, params) == pytest.approx(1.004e6)
    bare = PlantParams(theta1=1e-300, theta2=1e-300, vartheta=50.0)
    doubled = PlantParams(theta1=1e-300, theta2=1e-300, vartheta=100.0)
    assert lyapunov_rate(2.0, doubled) == pytest.approx(4 * lyapunov_rate(2.0, bare))
    with pytest.raises(InvalidInput):
        lyapunov_rate(0.0, params)


def test_k1_sweep_records_failures(iandi_cfg):
    rows = k1_sweep([1.0, -1.0], False, iandi_cfg, workers=1)
    assert [row.k1 for row in rows] == [1.0, -1.0]
    assert rows[0].error is None
    assert rows[1].stable is False
    assert "iandi.k1" in rows[1].error


def test_k1_sweep_verdict_threshold(iandi_cfg):
    strict = k1_sweep([1.0], False, iandi_cfg, threshold=1e-12, workers=1)
    assert not strict[0].stable
    assert strict[0].error is None
    loose = k1_sweep([1.0], False, iandi_cfg, threshold=1e6, workers=1)
    assert loose[0].stable


def test_k1_sweep_noise(iandi_cfg):
    quiet = k1_sweep([2.0], False, iandi_cfg, workers=1)[0]
    noisy = k1_sweep([2.0], True, iandi_cfg, workers=1)[0]
    assert noisy.noisy and not quiet.noisy
    assert noisy.max_observer_error != quiet.max_observer_error


def test_k1_sweep_serial_and_parallel_agree(iandi_cfg):
    serial = k1_sweep([1.0, 3.0, 5.0], True, iandi_cfg, workers=1)
    parallel = k1_sweep([1.0, 3.0, 5.0], True, iandi_cfg, workers=2)
    assert serial == parallel
