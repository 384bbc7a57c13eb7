"""
The RunLog class holds the decimated time series of one closed-loop run, column by column, and
the CSV writers and reader for it and for the k1 sweep table.

CSV values are written in scientific notation with 12 significant digits and "\\n" line
endings, so a deterministic log always produces the same bytes.
"""

import csv
import logging
import math
from pathlib import Path
from typing import Dict, Iterable, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from friction_observers.exception import ImmutablePropertyError, InvalidInput, OutputError

log: logging.Logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

_HEAD = ("t", "r", "x1", "x2", "y")
_TAIL = ("x2_hat", "theta1_hat", "theta2_hat", "u", "u_star", "eps_formula", "eps_residual")

SWEEP_COLUMNS = (
    "k1",
    "noisy",
    "stable",
    "rms_tracking_error",
    "max_observer_error",
    "tv_u",
    "diverged_at",
)


def iandi_columns() -> Tuple[str, ...]:
    """Columns of an I&I run."""
    return _HEAD + _TAIL


def sm_columns() -> Tuple[str, ...]:
    """Columns of a sliding mode run; adds the position estimate."""
    return _HEAD + ("x1_hat",) + _TAIL


def format_value(value: float) -> str:
    """A float in scientific notation with 12 significant digits."""
    return f"{value:.11e}"


class RunLog:
    """
    Column-ordered table of logged signals. Rows are grid points kept after decimation, so `t`
    is strictly increasing and uniform.

    Besides the CSV columns a log carries `meta` (run label, observer kind, true parameters) and
    `extras`, the observer's internal states on the same rows. Extras are never written to CSV.
    """

    __slots__ = ("_columns", "_data", "_decimation", "_meta", "_extras", "_index")

    def __init__(
        self,
        columns: Sequence[str],
        data: Union[np.ndarray, Sequence[Sequence[float]]],
        decimation: int = 1,
        meta: Optional[Mapping[str, object]] = None,
        extras: Optional[Mapping[str, np.ndarray]] = None,
    ):
        """
        Args:
            columns (Sequence[str]): Unique column names; the first must be `t`.
            data (np.ndarray): Array of shape (rows, len(columns)). Zero rows is allowed.
            decimation (int): Number of integration steps between rows.
            meta (Optional[Mapping[str, object]]): Descriptive run information.
            extras (Optional[Mapping[str, np.ndarray]]): Per-row internal signals.
        """
        columns = tuple(columns)
        if not columns or columns[0] != "t":
            raise InvalidInput("The first column of a run log must be 't'.")
        if len(set(columns)) != len(columns):
            raise InvalidInput("Duplicate column names: %s" % (columns,))
        table = np.array(data, dtype=float)
        if table.size == 0:
            table = table.reshape(0, len(columns))
        if table.ndim != 2 or table.shape[1] != len(columns):
            raise InvalidInput(
                "Expected %d columns, got data of shape %s." % (len(columns), table.shape)
            )
        if table.shape[0] > 1 and not (np.diff(table[:, 0]) > 0).all():
            raise InvalidInput("Column 't' must be strictly increasing.")
        if decimation < 1:
            raise InvalidInput("Decimation must be a positive integer.")
        table.setflags(write=False)

        extra_arrays: Dict[str, np.ndarray] = {}
        for name, values in (extras or {}).items():
            arr = np.array(values, dtype=float).reshape(-1)
            if arr.size != table.shape[0]:
                raise InvalidInput(f"Extra signal '{name}' does not match the row count.")
            arr.setflags(write=False)
            extra_arrays[name] = arr

        self._columns: Tuple[str, ...] = columns
        self._data: np.ndarray = table
        self._decimation: int = int(decimation)
        self._meta: Dict[str, object] = dict(meta or {})
        self._extras: Dict[str, np.ndarray] = extra_arrays
        self._index: Dict[str, int] = {name: i for i, name in enumerate(columns)}

    def __repr__(self):
        label = self._meta.get("label", "")
        return f"<RunLog '{label}': {len(self)} rows x {len(self._columns)} columns>"

    def __len__(self):
        return self._data.shape[0]

    def __contains__(self, name: str) -> bool:
        return name in self._index

    def __getitem__(self, name: str) -> np.ndarray:
        return self._data[:, self._index[name]]

    @property
    def columns(self) -> Tuple[str, ...]:
        """
        Column names, in CSV order.

        Returns:
            Tuple[str, ...]: The names.
        """
        return self._columns

    @columns.setter
    def columns(self, _):
        raise ImmutablePropertyError("Property columns is immutable.")

    @property
    def data(self) -> np.ndarray:
        """
        The read-only table.

        Returns:
            np.ndarray: Shape (rows, columns).
        """
        return self._data

    @data.setter
    def data(self, _):
        raise ImmutablePropertyError("Property data is immutable.")

    @property
    def decimation(self) -> int:
        return self._decimation

    @decimation.setter
    def decimation(self, _):
        raise ImmutablePropertyError("Property decimation is immutable.")

    @property
    def meta(self) -> Dict[str, object]:
        """A copy of the run description."""
        return dict(self._meta)

    @meta.setter
    def meta(self, _):
        raise ImmutablePropertyError("Property meta is immutable.")

    @property
    def extras(self) -> Dict[str, np.ndarray]:
        """Observer internals on the logged rows, keyed by state name."""
        return dict(self._extras)

    @extras.setter
    def extras(self, _):
        raise ImmutablePropertyError("Property extras is immutable.")

    @property
    def label(self) -> str:
        return str(self._meta.get("label", ""))

    def rows(self) -> Iterable[Tuple[float, ...]]:
        for row in self._data.tolist():
            yield tuple(row)


def _open_for_writing(path: PathLike):
    path = Path(path)
    try:
        if path.parent and not path.parent.exists():
            path.parent.mkdir(parents=True)
        return open(path, "w", newline="", encoding="utf-8")
    except OSError as err:
        raise OutputError(path, err.strerror or str(err)) from err


def write_csv(run: RunLog, path: PathLike) -> Path:
    """
    Write a run log as CSV: a header with the column names, then one row per logged step.

    Args:
        run (RunLog): The log.
        path (PathLike): Destination file.

    Raises:
        OutputError: If the file cannot be written.

    Returns:
        Path: The written file.
    """
    path = Path(path)
    try:
        with _open_for_writing(path) as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(run.columns)
            for row in run.rows():
                writer.writerow([format_value(v) for v in row])
    except OSError as err:
        raise OutputError(path, err.strerror or str(err)) from err
    log.info("Wrote %d rows to %s", len(run), path)
    return path


def read_csv(path: PathLike, decimation: int = 1) -> RunLog:
    """
    Read a CSV written by `write_csv` back into a RunLog. Values are exact to the emitted
    digits; meta and extras are not stored in the file and come back empty.

    Args:
        path (PathLike): The CSV file.
        decimation (int): Decimation factor to attach to the log.

    Raises:
        InvalidInput: If the file is not a run log.

    Returns:
        RunLog: The log.
    """
    with open(path, "r", newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration as err:
            raise InvalidInput(f"'{path}' is empty.") from err
        try:
            rows = [[float(v) for v in row] for row in reader if row]
        except ValueError as err:
            raise InvalidInput(f"'{path}' contains a non-numeric value.") from err
    return RunLog(header, np.array(rows, dtype=float).reshape(len(rows), len(header)), decimation)


def _sweep_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float) and math.isnan(value):
        return "nan"
    return format_value(float(value))


def write_sweep_csv(rows: Sequence, path: PathLike) -> Path:
    """
    Write a k1 sweep table. `diverged_at` is empty for runs that did not diverge.

    Args:
        rows (Sequence[SweepRow]): Rows returned by scenario.k1_sweep.
        path (PathLike): Destination file.

    Raises:
        OutputError: If the file cannot be written.

    Returns:
        Path: The written file.
    """
    path = Path(path)
    try:
        with _open_for_writing(path) as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(SWEEP_COLUMNS)
            for row in rows:
                writer.writerow([_sweep_value(getattr(row, name)) for name in SWEEP_COLUMNS])
    except OSError as err:
        raise OutputError(path, err.strerror or str(err)) from err
    log.info("Wrote sweep table with %d rows to %s", len(rows), path)
    return path
