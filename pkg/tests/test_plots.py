import pytest
from matplotlib.figure import Figure

from friction_observers.exception import InvalidInput, OutputError
from friction_observers.plots import FIGURE_NAMES, _params, _tracking, emit_plots
from friction_observers.runlog import RunLog, iandi_columns
from friction_observers.scenario import run_scenario


@pytest.fixture
def iandi_run(iandi_cfg):
    run, _ = run_scenario(iandi_cfg)
    return run


def test_emits_four_svgs(tmp_path, iandi_run):
    paths = emit_plots(iandi_run, tmp_path / "figs")
    assert [p.name for p in paths] == [f"{name}.svg" for name in FIGURE_NAMES]
    for path in paths:
        text = path.read_text(encoding="utf-8")
        assert text.lstrip().startswith("<?xml")
        assert "<svg" in text


def test_figures_are_reproducible(tmp_path, iandi_run):
    first = emit_plots(iandi_run, tmp_path / "a")
    second = emit_plots(iandi_run, tmp_path / "b")
    for a, b in zip(first, second):
        assert a.read_bytes() == b.read_bytes()


def test_empty_log_writes_nothing(tmp_path):
    outdir = tmp_path / "figs"
    with pytest.raises(InvalidInput):
        emit_plots(RunLog(iandi_columns(), []), outdir)
    assert not outdir.exists()


def test_position_estimate_overlay(iandi_run, sm_cfg):
    sm_run, _ = run_scenario(sm_cfg)
    labels = {}
    for name, run in (("iandi", iandi_run), ("sm", sm_run)):
        fig = Figure()
        _tracking(fig, run)
        labels[name] = [line.get_label() for line in fig.axes[0].get_lines()]
    assert labels["iandi"] == ["r", "x1"]
    assert labels["sm"] == ["r", "x1", "x1_hat"]


def test_parameter_panels_show_errors_when_truth_is_known(iandi_run):
    fig = Figure()
    _params(fig, iandi_run)
    top = fig.axes[0].get_lines()[0]
    assert top.get_label() == "theta1 error"
    assert top.get_ydata()[-1] == pytest.approx(iandi_run["theta1_hat"][-1] - 0.4)

    bare = RunLog(iandi_run.columns, iandi_run.data)
    fig = Figure()
    _params(fig, bare)
    assert fig.axes[0].get_lines()[0].get_label() == "theta1_hat"


def test_failed_write_leaves_no_files(tmp_path, iandi_run, monkeypatch):
    outdir = tmp_path / "figs"
    real_savefig = Figure.savefig
    calls = []

    def failing_savefig(self, fname, *args, **kwargs):
        calls.append(fname)
        if len(calls) == 2:
            raise OSError(28, "No space left on device", str(fname))
        return real_savefig(self, fname, *args, **kwargs)

    monkeypatch.setattr(Figure, "savefig", failing_savefig)
    with pytest.raises(OutputError) as info:
        emit_plots(iandi_run, outdir)
    assert info.value.path == str(outdir / "f2_observer.svg")
    assert list(outdir.iterdir()) == []


def test_failed_write_keeps_the_previous_set(tmp_path, iandi_run, monkeypatch):
    outdir = tmp_path / "figs"
    before = {p.name: p.read_bytes() for p in emit_plots(iandi_run, outdir)}

    def failing_savefig(self, fname, *args, **kwargs):
        raise OSError(13, "Permission denied", str(fname))

    monkeypatch.setattr(Figure, "savefig", failing_savefig)
    with pytest.raises(OutputError):
        emit_plots(iandi_run, outdir)
    assert {p.name: p.read_bytes() for p in outdir.iterdir()} == before
