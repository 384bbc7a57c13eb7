"""
A series of example simulations. Each writes its output under ./example-output.
"""

from pathlib import Path

from friction_observers.plots import emit_plots
from friction_observers.report import compare_report
from friction_observers.runlog import write_csv, write_sweep_csv
from friction_observers.scenario import (
    IandIConfig,
    NoiseConfig,
    ScenarioConfig,
    ScenarioRunner,
    SlidingModeConfig,
    k1_sweep,
)

OUT = Path(__file__).parent / "example-output"


def compare(name, cfg_a, cfg_b):
    a = ScenarioRunner(cfg_a)
    b = ScenarioRunner(cfg_b)
    for runner, sub in ((a, "a"), (b, "b")):
        write_csv(runner.log, OUT / name / sub / "log.csv")
        emit_plots(runner.log, OUT / name / sub)
    report = compare_report(a.metrics, b.metrics, cfg_a.run_label, cfg_b.run_label)
    print(report)
    return report


########################
# Noise-free benchmark #
########################

compare("noise-free", ScenarioConfig(observer="iandi"), ScenarioConfig(observer="slidingmode"))

###################
# Noisy benchmark #
###################

noise = NoiseConfig(amplitude=3e-4)
compare(
    "noisy",
    ScenarioConfig(observer="iandi", noise=noise, seed=1),
    ScenarioConfig(observer="slidingmode", noise=noise, seed=1),
)

#################
# k1 gain sweep #
#################

rows = k1_sweep([1.0, 44.0, 88.0, 150.0], noisy=True, base=ScenarioConfig(seed=1))
write_sweep_csv(rows, OUT / "sweep.csv")
for row in rows:
    print(f"k1={row.k1:g}: {'stable' if row.stable else 'degraded'}")

#############################
# Known-parameter I&I loop  #
#############################

known = ScenarioRunner(ScenarioConfig(observer_gains=IandIConfig(frozen_theta=(0.4, 1.0))))
print("known parameters, max observer error:", known.metrics.max_observer_error)

###########################
# Sliding mode ablations  #
###########################

compare(
    "regressor-estimate",
    ScenarioConfig(observer="slidingmode", noise=noise, seed=1),
    ScenarioConfig(
        observer="slidingmode",
        observer_gains=SlidingModeConfig(regressor_velocity="estimate"),
        noise=noise,
        seed=1,
    ),
)
