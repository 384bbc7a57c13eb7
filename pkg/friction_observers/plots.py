"""
Renders a RunLog as the four standard figures, each a pair of stacked panels:

    f1_tracking  (a) r and x1 (plus x1_hat for the sliding mode observer)  (b) x1 - r
    f2_observer  (a) x2 and x2_hat                                          (b) x2_hat - x2
    f3_control   (a) u                                                      (b) u - u*
    f4_params    (a) theta1_hat - theta1                                    (b) theta2_hat - theta2

Figures are written as SVG through matplotlib's object API, without pyplot state, with a fixed
hash salt and no date stamp so the same log always gives the same files.
"""

import logging
from pathlib import Path
from typing import Callable, Dict, List, Tuple, Union

import matplotlib
from matplotlib.figure import Figure

from friction_observers.exception import InvalidInput, OutputError
from friction_observers.runlog import RunLog

log: logging.Logger = logging.getLogger(__name__)

FIGURE_NAMES = ("f1_tracking", "f2_observer", "f3_control", "f4_params")

_SVG_SETTINGS = {"svg.hashsalt": "friction-observers", "svg.fonttype": "path"}


def _tracking(fig: Figure, run: RunLog) -> None:
    top, bottom = fig.subplots(2, 1, sharex=True)
    t = run["t"]
    top.plot(t, run["r"], "k--", linewidth=1.0, label="r")
    top.plot(t, run["x1"], linewidth=1.0, label="x1")
    if "x1_hat" in run:
        top.plot(t, run["x1_hat"], linewidth=0.8, label="x1_hat")
    top.set_ylabel("position")
    top.set_title("(a) reference and position")
    bottom.plot(t, run["x1"] - run["r"], linewidth=1.0, label="x1 - r")
    bottom.set_ylabel("tracking error")
    bottom.set_title("(b) tracking error")


def _observer(fig: Figure, run: RunLog) -> None:
    top, bottom = fig.subplots(2, 1, sharex=True)
    t = run["t"]
    top.plot(t, run["x2"], linewidth=1.0, label="x2")
    top.plot(t, run["x2_hat"], "--", linewidth=0.8, label="x2_hat")
    top.set_ylabel("velocity")
    top.set_title("(a) velocity and estimate")
    bottom.plot(t, run["x2_hat"] - run["x2"], linewidth=1.0, label="x2_hat - x2")
    bottom.set_ylabel("observer error")
    bottom.set_title("(b) velocity estimation error")


def _control(fig: Figure, run: RunLog) -> None:
    top, bottom = fig.subplots(2, 1, sharex=True)
    t = run["t"]
    top.plot(t, run["u"], linewidth=0.8, label="u")
    top.set_ylabel("control")
    top.set_title("(a) control input")
    bottom.plot(t, run["u"] - run["u_star"], linewidth=0.8, label="u - u*")
    bottom.set_ylabel("control mismatch")
    bottom.set_title("(b) deviation from the ideal law")


def _params(fig: Figure, run: RunLog) -> None:
    top, bottom = fig.subplots(2, 1, sharex=True)
    t = run["t"]
    meta = run.meta
    for ax, i in ((top, 1), (bottom, 2)):
        true_value = meta.get(f"theta{i}")
        estimate = run[f"theta{i}_hat"]
        if true_value is None:
            ax.plot(t, estimate, linewidth=1.0, label=f"theta{i}_hat")
            ax.set_title(f"({'a' if i == 1 else 'b'}) estimate of theta{i}")
        else:
            ax.plot(t, estimate - float(true_value), linewidth=1.0, label=f"theta{i} error")
            ax.axhline(0.0, color="k", linewidth=0.5)
            ax.set_title(f"({'a' if i == 1 else 'b'}) parameter error theta{i}")
        ax.set_ylabel(f"theta{i}")


_RENDERERS: Dict[str, Callable[[Figure, RunLog], None]] = {
    "f1_tracking": _tracking,
    "f2_observer": _observer,
    "f3_control": _control,
    "f4_params": _params,
}


def _finish(fig: Figure, run: RunLog) -> None:
    for ax in fig.axes:
        ax.grid(True, linewidth=0.3)
        ax.legend(loc="upper right", fontsize="small")
    fig.axes[-1].set_xlabel("t [s]")
    fig.suptitle(run.label or "run")


def emit_plots(run: RunLog, outdir: Union[str, Path]) -> List[Path]:
    """
    Write the four figures of a run as SVG files.

    Args:
        run (RunLog): A non-empty log.
        outdir (Union[str, Path]): Output directory, created if needed.

    Raises:
        InvalidInput: If the log has no rows. Nothing is written.
        OutputError: If a file cannot be written. No figure of the set is left behind.

    Returns:
        List[Path]: The written files, in figure order.
    """
    if len(run) == 0:
        raise InvalidInput("Cannot plot an empty run log.")
    outdir = Path(outdir)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
    except OSError as err:
        raise OutputError(outdir, err.strerror or str(err)) from err

    # Figures are staged under temporary names and renamed once all of them are on disk.
    rendered: List[Tuple[Path, Figure]] = []
    for name in FIGURE_NAMES:
        fig = Figure(figsize=(8.0, 6.0))
        _RENDERERS[name](fig, run)
        _finish(fig, run)
        fig.tight_layout()
        rendered.append((outdir / f"{name}.svg", fig))

    staged: List[Tuple[Path, Path]] = []
    current = outdir
    try:
        with matplotlib.rc_context(_SVG_SETTINGS):
            for current, fig in rendered:
                tmp = current.with_name(f".{current.name}.tmp")
                staged.append((tmp, current))
                fig.savefig(tmp, format="svg", metadata={"Date": None})
        for tmp, current in staged:
            tmp.replace(current)
    except OSError as err:
        for tmp, _ in staged:
            tmp.unlink(missing_ok=True)
        raise OutputError(current, err.strerror or str(err)) from err

    written = [path for _, path in staged]
    for path in written:
        log.info("Wrote %s", path)
    return written
