"""Command-line interface: subcommands, artifacts, exit codes."""

import csv

import pytest

from mgshare.cli import main
from mgshare.simulate import CSV_HEADER


def test_simulate_writes_artifacts(tmp_path, capsys):
    rc = main(["simulate", "lv5", "--t-end", "12", "--out-dir", str(tmp_path)])
    assert rc == 0
    out = capsys.readouterr().out
    assert "simulated lv5" in out
    csv_path = tmp_path / "lv5_timeseries.csv"
    plot_path = tmp_path / "plot_lv5.py"
    assert csv_path.exists() and plot_path.exists()
    with open(csv_path) as fh:
        header = next(csv.reader(fh))
    assert header == CSV_HEADER
    text = plot_path.read_text()
    assert "matplotlib" in text and "lv5_timeseries.csv" in text
    compile(text, str(plot_path), "exec")  # generated script must be valid python


def test_simulate_overrides(tmp_path):
    rc = main(["simulate", "lv5", "--t-end", "2", "--sample-ms", "100",
               "--rel-tol", "1e-6", "--out-dir", str(tmp_path)])
    assert rc == 0
    with open(tmp_path / "lv5_timeseries.csv") as fh:
        rows = list(csv.reader(fh))
    assert len(rows) == 1 + 21 * 5  # 2 s at 100 ms, 5 units


def test_steady_state_proposed(capsys):
    rc = main(["steady-state", "lv5"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "equilibrium (proposed)" in out
    assert "overall                   : PASS" in out


def test_steady_state_droop(capsys):
    assert main(["steady-state", "lv5", "--mode", "droop"]) == 0
    assert "equilibrium (droop)" in capsys.readouterr().out


def test_stability_report(capsys):
    rc = main(["stability", "lv5", "--ratios", "0.1,0.01"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "feasible" in out
    assert out.count("stable") >= 2


def test_tune_report(capsys):
    rc = main(["tune", "lv5"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "k = k_d / sigma2" in out
    assert "7.236" in out
    assert "PASS" in out


def test_missing_scenario_exits_2(capsys):
    assert main(["simulate", "/no/such/file.scn"]) == 2
    assert "error" in capsys.readouterr().err


def test_invalid_scenario_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.scn"
    bad.write_text("[bases]\ns_base 100e3 VA\n")
    assert main(["simulate", str(bad)]) == 2
    err = capsys.readouterr().err
    assert "missing" in err


def test_bad_ratios_exits_2(capsys):
    assert main(["stability", "lv5", "--ratios", "a,b"]) == 2


def test_no_command_exits_2():
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2
