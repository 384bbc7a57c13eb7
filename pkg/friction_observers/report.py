"""
Plain-text side-by-side comparison of two runs.
"""

import math
from typing import List, Optional, Sequence, Tuple

from friction_observers.scenario import Metrics

NOT_AVAILABLE = "n/a"


def ratio(a: Optional[float], b: Optional[float]) -> Optional[float]:
    """
    b / a, or None when it is undefined. Equal values give exactly 1.0, including two zeros.

    Args:
        a (Optional[float]): Reference value.
        b (Optional[float]): Compared value.

    Returns:
        Optional[float]: The ratio.
    """
    if a is None or b is None or math.isnan(a) or math.isnan(b):
        return None
    if a == b:
        return 1.0
    if a == 0.0 or math.isinf(a):
        return None
    return b / a


def _fmt(value) -> str:
    if value is None:
        return NOT_AVAILABLE
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, float) and math.isnan(value):
        return NOT_AVAILABLE
    return f"{value:.6g}"


def _rows(a: Metrics, b: Metrics) -> List[Tuple[str, Optional[float], Optional[float]]]:
    return [
        ("rms tracking error", a.rms_tracking_error, b.rms_tracking_error),
        ("max tracking error", a.max_tracking_error, b.max_tracking_error),
        ("max observer error", a.max_observer_error, b.max_observer_error),
        ("final theta1 error", a.theta_error_final[0], b.theta_error_final[0]),
        ("final theta2 error", a.theta_error_final[1], b.theta_error_final[1]),
        ("total variation of u", a.control_total_variation, b.control_total_variation),
        ("settle time [s]", a.settle_time, b.settle_time),
    ]


def _table(header: Sequence[str], body: Sequence[Sequence[str]]) -> List[str]:
    widths = [max(len(row[i]) for row in [header, *body]) for i in range(len(header))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(header, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    for row in body:
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
    return lines


def compare_report(a: Metrics, b: Metrics, label_a: str = "A", label_b: str = "B") -> str:
    """
    Side-by-side metric table of two runs with ratios b / a, followed by the chattering ratio
    (total variation of u) and the noise-robustness ratio (max observer error).

    A diverged run is marked, and every ratio involving it is reported as n/a.

    Args:
        a (Metrics): Reference run.
        b (Metrics): Compared run.
        label_a (str): Name of the reference run.
        label_b (str): Name of the compared run.

    Returns:
        str: The report, newline-terminated.
    """
    any_diverged = a.diverged or b.diverged
    body = []
    for name, va, vb in _rows(a, b):
        r = None if any_diverged else ratio(va, vb)
        body.append([name, _fmt(va), _fmt(vb), _fmt(r)])
    body.append(["diverged", _fmt(a.diverged), _fmt(b.diverged), ""])

    lines = _table(["metric", label_a, label_b, f"{label_b}/{label_a}"], body)
    lines.append("")
    for label, m in ((label_a, a), (label_b, b)):
        if m.diverged:
            lines.append(f"{label}: DIVERGED at t={_fmt(m.diverged_at)}s ({m.error})")

    if any_diverged:
        chattering = robustness = None
    else:
        chattering = ratio(a.control_total_variation, b.control_total_variation)
        robustness = ratio(a.max_observer_error, b.max_observer_error)
    lines.append(f"chattering ratio (total variation of u, {label_b}/{label_a}): {_fmt(chattering)}")
    lines.append(
        f"noise-robustness ratio (max observer error, {label_b}/{label_a}): {_fmt(robustness)}"
    )
    return "\n".join(lines) + "\n"
