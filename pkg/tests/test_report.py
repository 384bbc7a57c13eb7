import math

import pytest

from friction_observers.report import NOT_AVAILABLE, compare_report, ratio
from friction_observers.scenario import Metrics

HEALTHY = Metrics(
    rms_tracking_error=0.01,
    max_observer_error=0.002,
    theta_error_final=(0.001, -0.003),
    control_total_variation=4.0,
    settle_time=7.25,
    max_tracking_error=0.03,
    window=(75.0, 150.0),
    tv_window=(100.0, 150.0),
)

CHATTERING = Metrics(
    rms_tracking_error=0.02,
    max_observer_error=0.01,
    theta_error_final=(0.01, 0.02),
    control_total_variation=400.0,
    settle_time=None,
    max_tracking_error=0.05,
    window=(75.0, 150.0),
    tv_window=(100.0, 150.0),
)

DIVERGED = Metrics(
    rms_tracking_error=math.nan,
    max_observer_error=math.nan,
    theta_error_final=(math.nan, math.nan),
    control_total_variation=12.0,
    diverged=True,
    diverged_at=3.5,
    error="x2 = 2e+06 exceeds the divergence bound",
)


def test_ratio():
    assert ratio(2.0, 5.0) == 2.5
    assert ratio(0.0, 0.0) == 1.0
    assert ratio(3.0, 3.0) == 1.0
    assert ratio(0.0, 1.0) is None
    assert ratio(None, 1.0) is None
    assert ratio(1.0, math.nan) is None


def test_identical_runs_have_unit_ratios():
    report = compare_report(HEALTHY, HEALTHY)
    assert "chattering ratio (total variation of u, B/A): 1" in report
    assert "noise-robustness ratio (max observer error, B/A): 1" in report
    assert "DIVERGED" not in report
    rows = [line.split() for line in report.splitlines() if line.startswith("rms")]
    assert rows[0][-1] == "1"


def test_report_layout():
    report = compare_report(HEALTHY, CHATTERING, "I&I", "SM")
    lines = report.splitlines()
    assert lines[0].split() == ["metric", "I&I", "SM", "SM/I&I"]
    assert set(lines[1]) == {"-", " "}
    assert report.endswith("\n")
    assert "chattering ratio (total variation of u, SM/I&I): 100" in report
    assert "noise-robustness ratio (max observer error, SM/I&I): 5" in report
    settle = next(line for line in lines if line.startswith("settle time"))
    assert settle.split()[-2:] == [NOT_AVAILABLE, NOT_AVAILABLE]


def test_diverged_run_is_marked():
    report = compare_report(HEALTHY, DIVERGED, "I&I", "SM")
    assert "SM: DIVERGED at t=3.5s (x2 = 2e+06 exceeds the divergence bound)" in report
    assert "chattering ratio (total variation of u, SM/I&I): n/a" in report
    assert "noise-robustness ratio (max observer error, SM/I&I): n/a" in report
    diverged = next(line for line in report.splitlines() if line.startswith("diverged"))
    assert diverged.split()[1:] == ["no", "yes"]
    tv = next(line for line in report.splitlines() if line.startswith("total variation"))
    assert tv.split()[-1] == NOT_AVAILABLE


@pytest.mark.parametrize("a, b", [(HEALTHY, CHATTERING), (DIVERGED, HEALTHY)])
def test_report_is_deterministic(a, b):
    assert compare_report(a, b) == compare_report(a, b)
