"""
Command-line entry point, installed as `friction-observers`.

    friction-observers run      [--config F] [--seed N] [--noise A] [--observer O] [--out D]
    friction-observers compare  [--config F] [--config-b F] [--seed N] [--noise A] [--out D]
    friction-observers sweep    [--config F] [--k1 K ...] [--noisy] [--threshold X] [--workers N]
    friction-observers defaults [--observer O]

Exit codes: 0 on success, 1 when an output file cannot be written, 2 on a configuration error,
3 when a run fails numerically.
"""

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

from friction_observers.config import default_config, dump_config, parse_config
from friction_observers.exception import (
    ConfigError,
    CovarianceDegenerate,
    NumericalBlowup,
    OutputError,
)
from friction_observers.plots import emit_plots
from friction_observers.report import compare_report
from friction_observers.runlog import write_csv, write_sweep_csv
from friction_observers.scenario import (
    IANDI,
    OBSERVERS,
    SLIDING_MODE,
    Metrics,
    ScenarioConfig,
    ScenarioRunner,
    k1_sweep,
)

log: logging.Logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_OUTPUT = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

DEFAULT_SWEEP = (1.0, 44.0, 88.0, 150.0)


def _common(parser: argparse.ArgumentParser, observer: bool = True) -> None:
    parser.add_argument("--config", type=str, help="YAML scenario file")
    parser.add_argument("--seed", type=int, help="override the noise seed")
    parser.add_argument("--noise", type=float, help="override the noise amplitude")
    if observer:
        parser.add_argument("--observer", choices=OBSERVERS, help="override the observer")
    parser.add_argument("--out", type=str, default="out", help="output directory")
    parser.add_argument(
        "-v", "--verbose", action="count", default=0, help="-v for INFO, -vv for DEBUG"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="friction-observers",
        description="Closed-loop simulations of adaptive velocity observers under friction.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate one scenario")
    _common(run)
    run.add_argument("--no-plots", action="store_true", help="skip the SVG figures")

    compare = sub.add_parser("compare", help="simulate two scenarios with a shared seed")
    _common(compare, observer=False)
    compare.add_argument(
        "--config-b", type=str, help="second scenario (default: sliding mode defaults)"
    )
    compare.add_argument("--no-plots", action="store_true", help="skip the SVG figures")

    sweep = sub.add_parser("sweep", help="sweep the I&I gain k1")
    _common(sweep, observer=False)
    sweep.add_argument("--k1", type=float, nargs="+", default=list(DEFAULT_SWEEP))
    sweep.add_argument("--noisy", action="store_true", help="add measurement noise")
    sweep.add_argument("--threshold", type=float, help="max observer error of a stable run")
    sweep.add_argument("--workers", type=int, help="worker processes (1 runs serially)")

    defaults = sub.add_parser("defaults", help="print the default scenario as YAML")
    defaults.add_argument("--observer", choices=OBSERVERS, default=IANDI)
    defaults.add_argument("-v", "--verbose", action="count", default=0)
    return parser


def _set_verbosity(level: int) -> None:
    if level <= 0:
        return
    pkg = logging.getLogger("friction_observers")
    new_level = logging.INFO if level == 1 else logging.DEBUG
    pkg.setLevel(new_level)
    for handler in pkg.handlers:
        handler.setLevel(new_level)


def _load(path: Optional[str], observer: Optional[str] = None) -> ScenarioConfig:
    if path:
        cfg = parse_config(path)
    else:
        cfg = default_config(observer or IANDI)
    if observer and observer != cfg.observer:
        cfg = replace(cfg, observer=observer, observer_gains=None)
    return cfg


def _override(cfg: ScenarioConfig, args: argparse.Namespace) -> ScenarioConfig:
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.noise is not None:
        cfg = replace(cfg, noise=replace(cfg.noise, amplitude=args.noise))
    return cfg


def _summary(label: str, m: Metrics) -> str:
    lines = [f"{label}:"]
    lines.append(f"  rms tracking error     {m.rms_tracking_error:.6g}")
    lines.append(f"  max observer error     {m.max_observer_error:.6g}")
    lines.append(
        f"  final theta error      ({m.theta_error_final[0]:.6g}, {m.theta_error_final[1]:.6g})"
    )
    lines.append(f"  total variation of u   {m.control_total_variation:.6g}")
    settle = "never" if m.settle_time is None else f"{m.settle_time:.6g}s"
    lines.append(f"  settle time            {settle}")
    if m.diverged:
        lines.append(f"  DIVERGED at t={m.diverged_at:.6g}s: {m.error}")
    return "\n".join(lines)


def _simulate(cfg: ScenarioConfig, outdir: Path, plots: bool) -> Metrics:
    runner = ScenarioRunner(cfg)
    run_log, metrics = runner.run()
    write_csv(run_log, outdir / "log.csv")
    if plots and len(run_log) > 0:
        emit_plots(run_log, outdir)
    return metrics


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = _override(_load(args.config, args.observer), args)
    metrics = _simulate(cfg, Path(args.out), not args.no_plots)
    print(_summary(cfg.run_label, metrics))
    return EXIT_NUMERICAL if metrics.diverged else EXIT_OK


def _cmd_compare(args: argparse.Namespace) -> int:
    cfg_a = _override(_load(args.config), args)
    cfg_b = _override(_load(args.config_b, None if args.config_b else SLIDING_MODE), args)
    # Shared seed unless the second file pins its own.
    if not args.config_b or args.seed is not None:
        cfg_b = replace(cfg_b, seed=cfg_a.seed)
    out = Path(args.out)
    a = _simulate(cfg_a, out / "a", not args.no_plots)
    b = _simulate(cfg_b, out / "b", not args.no_plots)
    report = compare_report(a, b, cfg_a.run_label, cfg_b.run_label)
    try:
        (out / "report.txt").write_text(report, encoding="utf-8")
    except OSError as err:
        raise OutputError(out / "report.txt", err.strerror or str(err)) from err
    print(report, end="")
    return EXIT_NUMERICAL if a.diverged or b.diverged else EXIT_OK


def _cmd_sweep(args: argparse.Namespace) -> int:
    base = _override(_load(args.config), args)
    rows = k1_sweep(args.k1, args.noisy, base, threshold=args.threshold, workers=args.workers)
    write_sweep_csv(rows, Path(args.out) / "sweep.csv")
    for row in rows:
        verdict = "stable" if row.stable else "degraded"
        detail = f" ({row.error})" if row.error else ""
        print(f"k1={row.k1:g}: {verdict}, max observer error {row.max_observer_error:.3g}{detail}")
    return EXIT_OK


def _cmd_defaults(args: argparse.Namespace) -> int:
    print(dump_config(default_config(args.observer)), end="")
    return EXIT_OK


_COMMANDS = {
    "run": _cmd_run,
    "compare": _cmd_compare,
    "sweep": _cmd_sweep,
    "defaults": _cmd_defaults,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Run the command line.

    Args:
        argv (Optional[Sequence[str]]): Arguments without the program name; defaults to
            sys.argv[1:].

    Returns:
        int: The exit code.
    """
    args = build_parser().parse_args(argv)
    _set_verbosity(args.verbose)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalBlowup, CovarianceDegenerate) as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OutputError as err:
        print(f"output error: {err}", file=sys.stderr)
        return EXIT_OUTPUT


if __name__ == "__main__":
    sys.exit(main())
