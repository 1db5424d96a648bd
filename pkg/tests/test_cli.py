import csv
import json

import pytest

from ehsim.cli import main
from ehsim.config import example_file, load_config, reference_page
from ehsim.engine import SimulationConfig
from ehsim.errors import ConfigurationError


def test_budget_table(capsys):
    assert main(["budget"]) == 0
    out = capsys.readouterr().out
    for v in ("2.451", "35.520", "0.895", "38.866", "1.279", "20.250", "16.200", "1.800", "39.529", "+0.663"):
        assert v in out


def test_budget_json(capsys):
    assert main(["budget", "--json"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert round(data["margin_j_per_day"], 3) == 0.663


def test_budget_with_config(tmp_path, capsys):
    ini = tmp_path / "c.ini"
    ini.write_text("[harvest]\nteg_efficiency = 0.45\n")
    assert main(["budget", "--json", "--config", str(ini)]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["total_recovery_j_per_day"] == pytest.approx(39.529 - 8.1, abs=1e-3)


def test_dark_cold_trace_simulation(tmp_path, capsys):
    trace = tmp_path / "dark.csv"
    assert main(["gen-trace", "--scenario", "dark-cold", "--seed", "1", "--out", str(trace)]) == 0
    out = tmp_path / "run"
    assert main(["simulate", "--trace", str(trace), "--days", "1", "--seed", "1", "--out", str(out), "--export", str(tmp_path / "gw.csv")]) == 0
    data = json.loads((out / "report.json").read_text())
    assert data["nodes"][0]["packets_emitted"] == 0
    assert data["nodes"][0]["audit"]["consumed_j"] == 0.0
    rows = list(csv.reader(open(out / "packets.csv")))
    assert len(rows) == 1
    assert len(list(csv.reader(open(tmp_path / "gw.csv")))) == 1
    capsys.readouterr()
    assert main(["report", "--run", str(out)]) == 0
    assert "packets emitted 0" in capsys.readouterr().out


def test_simulate_office_writes_outputs(tmp_path):
    out = tmp_path / "office"
    assert main(["simulate", "--scenario", "office-window-day", "--days", "2", "--seed", "4", "--out", str(out), "--export", str(tmp_path / "gw.json")]) == 0
    for name in ("report.json", "summary.txt", "soc.csv", "packets.csv"):
        assert (out / name).exists()
    data = json.loads((out / "report.json").read_text())
    gw = json.loads((tmp_path / "gw.json").read_text())
    assert len(gw) == data["nodes"][0]["packets_delivered"]
    soc = list(csv.reader(open(out / "soc.csv")))
    assert soc[0] == ["time_s", "node0_soc_j"] and len(soc) == 2 * 1440 + 2


def test_simulate_byte_identical(tmp_path):
    args = ["simulate", "--scenario", "doha-traffic", "--seed", "9", "--start-soc", "5", "--nodes", "2"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    for name in ("report.json", "packets.csv", "soc.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_calibrate_five_temperatures(tmp_path):
    grid = tmp_path / "grid.csv"
    assert main(["gen-grid", "--species", "CO", "--temps=-10,5,20,35,50", "--out", str(grid)]) == 0
    poly = tmp_path / "co.json"
    assert main(["calibrate", "--grid", str(grid), "--species", "CO", "--out", str(poly)]) == 0
    data = json.loads(poly.read_text())
    assert data["species"] == "CO" and len(data["coefficients"]) == 5
    assert data["max_residual_ppm"] <= 30.0


def test_calibrate_too_few_temperatures(tmp_path, capsys):
    grid = tmp_path / "grid.csv"
    assert main(["gen-grid", "--species", "NH3", "--temps", "0,10,20,30", "--out", str(grid)]) == 0
    assert main(["calibrate", "--grid", str(grid), "--species", "NH3", "--out", str(tmp_path / "p.json")]) == 1
    assert "error" in capsys.readouterr().err


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["frobnicate"],
        ["simulate"],
        ["simulate", "--scenario", "moon", "--out", "x"],
        ["gen-grid", "--species", "O3", "--out", "x.csv"],
    ],
)
def test_usage_errors_exit_1(argv, tmp_path):
    argv = [a if a != "x" else str(tmp_path / "x") for a in argv]
    assert main(argv) == 1


def test_invalid_config_exit_1(tmp_path):
    assert main(["simulate", "--nodes", "0", "--out", str(tmp_path / "r")]) == 1
    assert main(["simulate", "--mode", "fixed_step", "--step", "3", "--out", str(tmp_path / "r")]) == 1


def test_bad_trace_exit_1(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("timestamp_s,lux\n0,1\n")
    assert main(["simulate", "--trace", str(bad), "--out", str(tmp_path / "r")]) == 1


def test_io_errors_exit_2(tmp_path):
    assert main(["simulate", "--trace", str(tmp_path / "none.csv"), "--out", str(tmp_path / "r")]) == 2
    assert main(["report", "--run", str(tmp_path / "nowhere")]) == 2
    assert main(["calibrate", "--grid", str(tmp_path / "none.csv"), "--species", "CO", "--out", "p.json"]) == 2
    assert main(["budget", "--config", str(tmp_path / "none.ini")]) == 2


def test_version_and_help(capsys):
    assert main(["--version"]) == 0
    assert main(["budget", "--help"]) == 0


def test_config_reference(capsys):
    assert main(["config-ref"]) == 0
    page = capsys.readouterr().out
    assert page == reference_page() + "\n"
    for section in ("[run]", "[duty]", "[battery]", "[link]", "[topology]", "[harvest]"):
        assert section in page


def test_example_config_round_trip(tmp_path, capsys):
    assert main(["config-ref", "--example"]) == 0
    ini = tmp_path / "example.ini"
    ini.write_text(capsys.readouterr().out)
    cfg = load_config(ini)
    assert cfg.describe() == SimulationConfig().describe()
    assert cfg.duty == SimulationConfig().duty
    assert ini.read_text().strip() == example_file().strip()


def test_config_rejects_unknown_keys(tmp_path):
    ini = tmp_path / "c.ini"
    ini.write_text("[run]\nwarp = 9\n")
    with pytest.raises(ConfigurationError):
        load_config(ini)
    ini.write_text("[moon]\nx = 1\n")
    with pytest.raises(ConfigurationError):
        load_config(ini)


def test_config_file_drives_simulation(tmp_path):
    ini = tmp_path / "c.ini"
    ini.write_text("[run]\nscenario = dark-cold\nstart_soc = 14.76\ndays = 1\nseed = 2\n")
    out = tmp_path / "r"
    assert main(["simulate", "--config", str(ini), "--out", str(out)]) == 0
    data = json.loads((out / "report.json").read_text())
    assert data["config"]["scenario"] == "dark-cold"
    assert any(e["kind"] == "brown_out" for e in data["nodes"][0]["events"])
