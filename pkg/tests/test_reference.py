import numpy as np
import pytest

from friction_observers.exception import ConfigError, ImmutablePropertyError, InvalidInput
from friction_observers.reference import (
    PiecewiseReference,
    ReferenceSample,
    Segment,
    default_reference,
    reference_eval,
)


def test_default_reference_values():
    ref = default_reference()
    assert reference_eval(ref, 10.0) == (1.0, 0.0, 0.0)
    assert reference_eval(ref, 60.0) == (1.5, 0.0, 0.0)
    sample = reference_eval(ref, 100.0)
    assert sample.r == pytest.approx(1.0, abs=1e-12)
    assert sample.rdot == pytest.approx(-0.05, abs=1e-15)
    assert sample.rddot == 0.0
    assert reference_eval(ref, 120.0) == (0.5, 0.0, 0.0)
    assert reference_eval(ref, 1e6) == (0.5, 0.0, 0.0)


def test_breakpoints_use_the_right_hand_segment():
    ref = default_reference()
    assert reference_eval(ref, 0.0) == (1.0, 0.0, 0.0)
    assert reference_eval(ref, 50.0) == (1.5, 0.0, 0.0)
    assert reference_eval(ref, 90.0) == (1.5, -0.05, 0.0)
    assert reference_eval(ref, 110.0) == (0.5, 0.0, 0.0)
    assert ref.breakpoints == (0.0, 50.0, 90.0, 110.0)


def test_ramp_is_continuous_at_its_end():
    ref = default_reference()
    assert reference_eval(ref, 110.0 - 1e-9).r == pytest.approx(0.5, abs=1e-9)


def test_negative_time_is_rejected():
    with pytest.raises(InvalidInput):
        reference_eval(default_reference(), -0.1)


def test_finite_difference_matches_rdot():
    ref = default_reference()
    h = 1e-4
    for t in np.arange(0.5, 149.5, 0.37):
        if any(abs(t - b) <= 2 * h for b in ref.breakpoints):
            continue
        fd = (ref.evaluate(t + h).r - ref.evaluate(t - h).r) / (2 * h)
        assert fd == pytest.approx(ref.evaluate(t).rdot, abs=1e-8)


def test_reference_is_bounded():
    ref = default_reference()
    low, high = ref.bounds
    assert (low, high) == (0.5, 1.5)
    for t in np.linspace(0.0, 200.0, 2001):
        assert low <= ref.evaluate(t).r <= high


def test_custom_reference():
    ref = PiecewiseReference(
        [
            Segment(0.0, "ramp", value_from=0.0, value_to=2.0),
            Segment(4.0, "hold", value=2.0),
        ]
    )
    assert ref.evaluate(1.0) == ReferenceSample(0.5, 0.5, 0.0)
    assert ref.evaluate(5.0) == ReferenceSample(2.0, 0.0, 0.0)


@pytest.mark.parametrize(
    "segments",
    [
        [],
        [Segment(1.0, "hold", value=1.0)],
        [Segment(0.0, "hold", value=1.0), Segment(0.0, "hold", value=2.0)],
        [Segment(0.0, "hold", value=1.0), Segment(5.0, "ramp", value_from=1.0, value_to=2.0)],
    ],
)
def test_invalid_references(segments):
    with pytest.raises(ConfigError):
        PiecewiseReference(segments)


def test_invalid_segments():
    with pytest.raises(ConfigError):
        Segment(0.0, "hold")
    with pytest.raises(ConfigError):
        Segment(0.0, "ramp", value=1.0)
    with pytest.raises(ConfigError):
        Segment(0.0, "spline", value=1.0)


def test_reference_is_immutable():
    ref = default_reference()
    with pytest.raises(ImmutablePropertyError):
        ref.segments = ()
    with pytest.raises(ImmutablePropertyError):
        ref.breakpoints = ()


def test_reference_equality():
    assert default_reference() == default_reference()
    assert default_reference() != PiecewiseReference([Segment(0.0, "hold", value=1.0)])
