"""
Piecewise desired trajectories r(t) with consistent first and second derivatives.

A reference is a list of segments, each starting at a breakpoint. A `hold` segment keeps a
constant level, a `ramp` segment moves linearly from `value_from` to `value_to` and ends at the
next breakpoint. The last segment extends to infinity, so it must be a hold.

Derivatives are the piecewise classical ones, right-continuous at breakpoints: at a jump
instant the right-hand segment is used, so rdot and rddot are zero there rather than impulsive.
"""

import math
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from friction_observers.exception import ConfigError, ImmutablePropertyError, InvalidInput
from friction_observers.kernels import reference_at

HOLD = "hold"
RAMP = "ramp"


class ReferenceSample(NamedTuple):
    """Reference position, velocity and acceleration at one instant."""

    r: float
    rdot: float
    rddot: float


@dataclass(frozen=True)
class Segment:
    """
    One piece of a piecewise reference.

    Attributes:
        t_start (float): Breakpoint at which the segment starts.
        kind (str): `hold` or `ramp`.
        value (Optional[float]): Level of a hold segment.
        value_from (Optional[float]): Start level of a ramp.
        value_to (Optional[float]): End level of a ramp, reached at the next breakpoint.
    """

    t_start: float
    kind: str = HOLD
    value: Optional[float] = None
    value_from: Optional[float] = None
    value_to: Optional[float] = None

    def __post_init__(self):
        if self.kind == HOLD:
            if self.value is None or self.value_from is not None or self.value_to is not None:
                raise ConfigError("reference", "a hold segment takes exactly one 'value'")
        elif self.kind == RAMP:
            if self.value is not None or self.value_from is None or self.value_to is None:
                raise ConfigError(
                    "reference", "a ramp segment takes 'value_from' and 'value_to'"
                )
        else:
            raise ConfigError("reference", f"unknown segment kind '{self.kind}'")
        for name in ("t_start", "value", "value_from", "value_to"):
            v = getattr(self, name)
            if v is not None and not math.isfinite(v):
                raise ConfigError("reference", f"'{name}' must be finite")

    @property
    def levels(self) -> Tuple[float, ...]:
        if self.kind == HOLD:
            return (self.value,)
        return self.value_from, self.value_to


class PiecewiseReference:
    """
    An immutable piecewise hold/ramp reference covering [0, inf).
    """

    __slots__ = ("_segments", "_starts", "_slopes", "_arrays")

    def __init__(self, segments: Sequence[Segment]):
        """
        Args:
            segments (Sequence[Segment]): Segments ordered by strictly increasing t_start. The
                first must start at 0 and the last must be a hold.
        """
        segments = tuple(segments)
        if not segments:
            raise ConfigError("reference", "at least one segment is required")
        starts = [float(s.t_start) for s in segments]
        if starts[0] != 0.0:
            raise ConfigError("reference", "the first segment must start at t = 0")
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ConfigError("reference", "breakpoints must be strictly increasing")
        if segments[-1].kind != HOLD:
            raise ConfigError("reference", "the last segment must be a hold")

        slopes: List[float] = []
        for i, seg in enumerate(segments):
            if seg.kind == RAMP:
                slopes.append((seg.value_to - seg.value_from) / (starts[i + 1] - starts[i]))
            else:
                slopes.append(0.0)

        self._segments: Tuple[Segment, ...] = segments
        self._starts: Tuple[float, ...] = tuple(starts)
        self._slopes: Tuple[float, ...] = tuple(slopes)
        bases = [seg.value if seg.kind == HOLD else seg.value_from for seg in segments]
        self._arrays: Tuple[np.ndarray, np.ndarray, np.ndarray] = tuple(
            np.array(v, dtype=float) for v in (starts, bases, slopes)
        )
        for arr in self._arrays:
            arr.setflags(write=False)

    def __repr__(self):
        return f"<PiecewiseReference: {len(self._segments)} segments>"

    def __eq__(self, other):
        if not isinstance(other, PiecewiseReference):
            return NotImplemented
        return self._segments == other._segments

    __hash__ = None

    @property
    def segments(self) -> Tuple[Segment, ...]:
        """
        The segments in time order.

        Returns:
            Tuple[Segment, ...]: The segments.
        """
        return self._segments

    @segments.setter
    def segments(self, _):
        raise ImmutablePropertyError("Property segments is immutable.")

    @property
    def breakpoints(self) -> Tuple[float, ...]:
        """
        Start times of the segments.

        Returns:
            Tuple[float, ...]: Strictly increasing breakpoints, starting at 0.
        """
        return self._starts

    @breakpoints.setter
    def breakpoints(self, _):
        raise ImmutablePropertyError("Property breakpoints is immutable.")

    @property
    def bounds(self) -> Tuple[float, float]:
        """Smallest and largest segment level; r(t) never leaves this interval."""
        levels = [level for seg in self._segments for level in seg.levels]
        return min(levels), max(levels)

    @property
    def arrays(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        Read-only (starts, bases, slopes) arrays. Segment i is
        bases[i] + slopes[i] * (t - starts[i]).
        """
        return self._arrays

    @arrays.setter
    def arrays(self, _):
        raise ImmutablePropertyError("Property arrays is immutable.")

    def evaluate(self, t: float) -> ReferenceSample:
        """
        Evaluate r, rdot and rddot at time t. At a breakpoint the right-hand segment is used.

        Args:
            t (float): Time, >= 0.

        Returns:
            ReferenceSample: (r, rdot, rddot).
        """
        return ReferenceSample(*reference_at(float(t), *self._arrays))


def default_reference() -> PiecewiseReference:
    """
    The default benchmark trajectory: 1 until t = 50, a step to 1.5, a ramp from 1.5 down to
    0.5 over [90, 110), then 0.5.

    Returns:
        PiecewiseReference: The default reference.
    """
    return PiecewiseReference(
        [
            Segment(0.0, HOLD, value=1.0),
            Segment(50.0, HOLD, value=1.5),
            Segment(90.0, RAMP, value_from=1.5, value_to=0.5),
            Segment(110.0, HOLD, value=0.5),
        ]
    )


def reference_eval(ref: PiecewiseReference, t: float) -> ReferenceSample:
    """
    Evaluate a piecewise reference.

    Args:
        ref (PiecewiseReference): The reference.
        t (float): Time, >= 0.

    Raises:
        InvalidInput: If t is negative.

    Returns:
        ReferenceSample: (r, rdot, rddot).
    """
    if t < 0:
        raise InvalidInput(f"Reference evaluated at negative time {t}.")
    return ref.evaluate(t)
