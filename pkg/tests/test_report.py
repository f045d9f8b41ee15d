import json

import pytest

from graphreg.errors import DataIOError, ValidationError
from graphreg.harness.report import HEADER, ExperimentReport, aggregate_path, emit_report


def _row(method, M, N, trial, nmse, wall=0.0):
    return {"method": method, "M": M, "N": N, "trial": trial, "nmse": nmse, "wall_time_s": wall}


def test_empty_report_is_header_only(tmp_path):
    path = tmp_path / "report.csv"
    emit_report(ExperimentReport(), str(path))
    assert path.read_text() == ",".join(HEADER) + "\n"


def test_rows_are_written_in_canonical_order(tmp_path):
    report = ExperimentReport()
    report.add([
        _row("NR-LRG", 5, 8, 0, 0.3),
        _row("LR", 6, 8, 0, 0.5),
        _row("LR", 5, 8, 0, 0.4),
    ])
    path = tmp_path / "report.csv"
    emit_report(report, str(path))
    lines = path.read_text().splitlines()
    assert len(lines) == 4
    assert lines[1] == "LR,5,8,0,0.4,0.0"
    assert lines[2].startswith("LR,6,")
    assert lines[3].startswith("NR-LRG,5,")


def test_aggregate_averages_trials(tmp_path):
    report = ExperimentReport()
    report.add([_row("LRG", 5, 4, 0, 0.2), _row("LRG", 5, 4, 1, 0.4)])
    (agg,) = report.aggregate()
    assert agg["nmse"] == pytest.approx(0.3)
    assert agg["trials"] == 2

    path = tmp_path / "run.csv"
    emit_report(report, str(path))
    lines = (tmp_path / "run.agg.dat").read_text().splitlines()
    assert lines[0].startswith("#")
    method, M, N, mean, trials = lines[1].split()
    assert (method, M, N, trials) == ("LRG", "5", "4", "2")
    assert float(mean) == pytest.approx(0.3)


def test_metadata_sidecar(tmp_path):
    report = ExperimentReport(metadata={"truth": "clean", "selected": [{"alpha": 0.1}]})
    path = tmp_path / "report.csv"
    emit_report(report, str(path), aggregate=False)
    meta = json.loads((tmp_path / "report.csv.meta.json").read_text())
    assert meta["truth"] == "clean"
    assert not (tmp_path / "report.agg.dat").exists()


def test_select_filters_rows():
    report = ExperimentReport()
    report.add([_row("LR", 5, 4, 0, 0.1), _row("LRG", 5, 4, 0, 0.2)])
    assert [r["method"] for r in report.select(method="LRG")] == ["LRG"]


def test_unknown_method_rejected():
    with pytest.raises(ValidationError, match="method"):
        ExperimentReport().add([_row("SVM", 5, 4, 0, 0.1)])


def test_negative_nmse_rejected():
    with pytest.raises(ValidationError):
        ExperimentReport().add([_row("LR", 5, 4, 0, -0.1)])


def test_unwritable_path(tmp_path):
    blocker = tmp_path / "blocker"
    blocker.write_text("")
    with pytest.raises(DataIOError, match="blocker"):
        emit_report(ExperimentReport(), str(blocker / "report.csv"))


def test_aggregate_path_replaces_extension():
    assert aggregate_path("/tmp/out/report.csv") == "/tmp/out/report.agg.dat"
