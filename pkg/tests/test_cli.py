import csv
import io
import json
import math
import subprocess
import sys

import pytest

from thermogap import bounds as kb
from thermogap import cli
from thermogap.validate import CheckResult


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_ki_bounds_csv(tmp_path, capsys):
    out = tmp_path / "bounds.csv"
    code, _, _ = run(["ki-bounds", "--eta", "0.57735", "--delta-grid", "-1:1:0.01", "--gamma", "1",
                      "--out", str(out)], capsys)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out.read_text())))
    assert list(rows[0]) == ["delta", "Delta12", "Delta3", "Delta4", "full_min"]
    assert len(rows) == 201
    assert float(rows[0]["delta"]) == -1.0 and float(rows[-1]["delta"]) == 1.0
    mid = rows[100]
    assert abs(float(mid["Delta12"]) - kb.delta12(0.57735, 0.0)) < 1e-15


def test_float_output_has_full_precision(capsys):
    code, text, _ = run(["ki-bounds", "--eta", "0.3", "--delta-grid", "0.1"], capsys)
    assert code == 0
    row = json.loads(text)["rows"][0]
    assert row["Delta12"] == float(kb.delta12(0.3, 0.1))


def test_parse_grid():
    assert cli.parse_grid("0:1:0.25") == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert cli.parse_grid("-1,0.5") == [-1.0, 0.5]
    assert cli.parse_grid("") == []
    for bad in ("0:1:0", "1:0:0.5", "a,b"):
        with pytest.raises(ValueError):
            cli.parse_grid(bad)


def test_config_file_and_flag_override(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# kinetic Ising chain\neta = 0.4\ndelta = 0.25\nn = 6\n")
    code, text, _ = run(["ki-gap", "--config", str(cfg)], capsys)
    assert code == 0
    rec = json.loads(text)
    assert rec["rows"][0]["delta"] == 0.25 and rec["rows"][0]["N"] == 6
    code, text, _ = run(["ki-gap", "--config", str(cfg), "--delta", "-0.5"], capsys)
    assert json.loads(text)["rows"][0]["delta"] == -0.5


def test_unknown_config_key_is_rejected(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("eta = 0.4\ntemperature = 3\n")
    code, _, err = run(["ki-gap", "--config", str(cfg)], capsys)
    assert code == 1 and "temperature" in err


def test_malformed_flags_exit_one(capsys):
    assert run(["ki-gap", "--eta", "zero"], capsys)[0] == 1
    assert run(["ki-gap"], capsys)[0] == 1
    assert run(["no-such-command"], capsys)[0] == 1
    assert run(["ki-bounds", "--eta", "0.3", "--delta-grid", "0:1:-1"], capsys)[0] == 1


def test_closed_gap_exit_three(capsys):
    assert run(["ki-gap", "--epsilon", "0", "--n", "6"], capsys)[0] == 3
    assert run(["ki-gap", "--eta", "0.5", "--n", "6", "--delta", "-1"], capsys)[0] == 3
    assert run(["ki-optimize", "--eta", "1"], capsys)[0] == 3


def test_config_echo_round_trip(tmp_path, capsys):
    argv = ["ki-optimize", "--eta", "0.45", "--restarts", "2", "--budget", "60", "--seed", "4"]
    code, first, _ = run(argv, capsys)
    assert code == 0
    echo = json.loads(first)["meta"]["config"]
    cfg = tmp_path / "echo.cfg"
    cfg.write_text("".join(f"{k} = {v}\n" for k, v in echo.items()))
    code, second, _ = run([echo["command"], "--config", str(cfg)], capsys)
    assert code == 0
    assert json.loads(second)["rows"] == json.loads(first)["rows"]


def test_identical_runs_are_byte_identical(tmp_path, capsys):
    argv = ["lmg-optimize", "--s", "2", "--restarts", "2", "--budget", "60", "--seed", "3"]
    outs = []
    for i in range(2):
        path = tmp_path / f"o{i}.json"
        assert run(argv + ["--out", str(path)], capsys)[0] == 0
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]
    rec = json.loads(outs[0])
    row = rec["rows"][0]
    assert set(row["gamma_opt"]) == {"real", "imag"}
    assert len(row["gamma_opt"]["real"]) == 3
    assert row["ratio"] >= 1.0 - 1e-12


def test_lmg_gap_kinetic_forms(capsys):
    code, text, _ = run(["lmg-gap", "--s", "1", "--beta-tilde", "0", "--kinetic", "identity"], capsys)
    assert code == 0 and abs(json.loads(text)["rows"][0]["gap"] - 1.0) < 1e-10
    code, _, _ = run(["lmg-gap", "--s", "1", "--kinetic", "1,2,3"], capsys)
    assert code == 0
    assert run(["lmg-gap", "--s", "1", "--kinetic", "1,2"], capsys)[0] == 1


def test_single_body_command(capsys):
    code, text, _ = run(["single-body-opt", "--energies", "0,0.5,2", "--kind", "classical"], capsys)
    row = json.loads(text)["rows"][0]
    assert code == 0 and abs(row["gap"] - 1.5) < 1e-12 and abs(row["cost"] - 1.0) < 1e-10


def test_validate_passes(tmp_path, capsys):
    out = tmp_path / "v.csv"
    code, _, _ = run(["validate", "--suite", "all", "--out", str(out)], capsys)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out.read_text())))
    assert rows and all(r["passed"] == "True" for r in rows)


def test_validation_failure_exit_two(monkeypatch, capsys):
    def failing(name, seed):
        return [CheckResult("demo", "always_fails", False, 1.0, 0.0)]

    monkeypatch.setattr(cli, "run_suite", failing)
    code, text, err = run(["validate"], capsys)
    assert code == 2 and "always_fails" in err
    assert json.loads(text)["rows"][0]["passed"] is False


def test_sweep_command_csv(capsys):
    code, text, _ = run(["sweep", "--model", "ki", "--axis", "delta", "--grid", "-0.5:0.5:0.5",
                         "--set", "N=6,epsilon=0.5", "--format", "csv"], capsys)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(text)))
    assert [float(r["delta"]) for r in rows] == [-0.5, 0.0, 0.5]
    assert all(float(r["ed_gap"]) <= 1.05 * float(r["full_min"]) for r in rows)


def test_sweep_set_values(capsys):
    code, text, _ = run(["sweep", "--model", "ki", "--axis", "eta", "--grid", "0.2,0.6", "--axis2", "y",
                         "--grid2", "0.5,1", "--set", "N=6,ed=false"], capsys)
    rows = json.loads(text)["rows"]
    assert code == 0 and len(rows) == 4 and all("ed_gap" not in r for r in rows)
    assert run(["sweep", "--model", "ki", "--axis", "delta", "--grid", "0", "--set", "temperature=1"], capsys)[0] == 1
    assert run(["sweep", "--model", "ki", "--axis", "delta", "--grid", "0", "--set", "N=ten"], capsys)[0] == 1


def test_sweep_empty_grid(capsys):
    code, text, _ = run(["sweep", "--model", "ki", "--axis", "delta", "--grid", "", "--format", "csv"], capsys)
    assert code == 0


def test_threads_from_environment(monkeypatch, capsys):
    monkeypatch.setenv("THERMOGAP_THREADS", "2")
    code, text, _ = run(["ki-bounds", "--eta", "0.3", "--delta-grid", "0"], capsys)
    assert code == 0 and json.loads(text)["meta"]["config"]["threads"] == 2
    monkeypatch.setenv("THERMOGAP_THREADS", "zero")
    assert run(["ki-bounds", "--eta", "0.3", "--delta-grid", "0"], capsys)[0] == 1


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "thermogap.cli", "ki-optimize", "--eta", str(1 / math.sqrt(3)),
                           "--restarts", "2"], capture_output=True, text=True, check=True)
    row = json.loads(proc.stdout)["rows"][0]
    assert abs(row["delta_opt"] - row["stationary_delta"]) < 1e-3
