import json
import subprocess
import sys

import pytest

from nfeapd.cli import main
from nfeapd.io import read_timeseries_csv


def test_info_table1(capsys):
    assert main(["info"]) == 0
    out = capsys.readouterr().out
    for line in ("c_L = 6123.7 m/s", "c_S = 3535.5 m/s", "c_R = 3244.2 m/s", "M_J = 0.083333333333"):
        assert line in out


def test_unknown_subcommand_exits_2():
    r = subprocess.run([sys.executable, "-m", "nfeapd", "bogus"], capture_output=True)
    assert r.returncode == 2


def test_bad_scenario_returns_1(tmp_path, capsys):
    p = tmp_path / "s.json"
    p.write_text('{"name": "x"}')
    assert main(["run", "--scenario", str(p), "--out", str(tmp_path / "o")]) == 1


def test_dump_scenario(tmp_path):
    assert main(["run", "--preset", "mode1", "--m", "2", "--override", "name=small",
                 "--out", str(tmp_path), "--dump-scenario"]) == 0
    d = json.loads((tmp_path / "scenario.json").read_text())
    assert d["name"] == "small" and d["mesh"]["m"] == 2
    assert not list(tmp_path.glob("*.vtk"))


def test_run_writes_outputs(tmp_path):
    out = tmp_path / "run"
    assert main(["run", "--preset", "mode1", "--m", "2", "--t-fraction", "0.1",
                 "--dt-factor", "5", "--out", str(out), "--vtk-every", "2"]) == 0
    for name in ("series.csv", "summary.json", "scenario.json", "damage_final.png",
                 "strain_final.png", "crack.csv"):
        assert (out / name).stat().st_size > 0, name
    # no damage this early, so the trace is empty and there is no speed plot
    assert len(read_timeseries_csv(out / "crack.csv")["t"]) == 0
    assert not (out / "crack_speed.png").exists()
    vtks = sorted(out.glob("snapshot_*.vtk"))
    assert len(vtks) >= 2
    summary = json.loads((out / "summary.json").read_text())
    assert summary["steps"] > 0 and not summary["diverged"]
    series = read_timeseries_csv(out / "series.csv")
    assert series["t"][0] == 0.0


def test_rates_writes_csv_and_figure(tmp_path):
    assert main(["rates", "--preset", "convergence_square", "--t-fraction", "0.05",
                 "--ladder", "2,4", "--reference", "6", "--out", str(tmp_path)]) == 0
    rates = read_timeseries_csv(tmp_path / "rates.csv")
    assert list(rates) == ["t", "alpha_2_4"]
    assert rates["t"].tolist() == [0.0, 0.01, 0.02] and (tmp_path / "rates.png").stat().st_size > 0
