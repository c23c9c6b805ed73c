import csv
import json
import re
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from evade import cli
from evade import dynamics as dyn

GOLDEN = Path(__file__).parent / "golden" / "help.txt"


def run(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def _echo(err):
    return json.loads(err.strip().splitlines()[0])


def test_help_matches_golden(monkeypatch):
    monkeypatch.setenv("COLUMNS", "80")
    assert cli.build_parser().format_help() == GOLDEN.read_text()


def test_help_lists_every_flag():
    text = cli.build_parser().format_help()
    flags = [a.option_strings[-1] for a in cli.build_parser()._actions if a.option_strings]
    for f in flags:
        assert f in text
    for f in ("--lambda", "--speed", "--dim", "--model", "--strategy", "--depth", "--horizon",
              "--trials", "--seed", "--lambda-grid", "--coupled", "--output", "--format",
              "--step-dt", "--threads", "--config"):
        assert f in flags


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "evade", "--version"], capture_output=True,
                         text=True, check=True)
    assert re.fullmatch(r"evade \d+\.\d+\.\d+\n", out.stdout)


def test_survival_example(tmp_path, capsys):
    out = tmp_path / "out.csv"
    code, _, err = run(["survival", "--lambda", "0.1", "--speed", "1", "--dim", "2",
                        "--strategy", "percolation", "--depth", "50", "--trials", "1000",
                        "--seed", "7", "--output", str(out)], capsys)
    assert code == 0
    rows = list(csv.DictReader(open(out)))
    assert len(rows) == 1
    assert rows[0]["grid_value"] == "0.1" and rows[0]["trials"] == "1000"
    assert 0.0 < float(rows[0]["estimate"]) < 1.0
    assert _echo(err)["seed"] == 7


def test_cone_check_example(capsys):
    code, out, _ = run(["cone-check", "--dim", "2", "--speed", "1", "--xmax", "20",
                        "--jmax", "40"], capsys)
    assert code == 0 and out.strip() == "pass"


@pytest.mark.parametrize("argv", [
    ["survival", "--lambda", "-1", "--trials", "5"],
    ["survival", "--bogus"],
    ["teleport"],
    [],
    ["survival", "--lambda-grid", "0.1:1"],
    ["survival", "--strategy", "greedy", "--trials", "0"],
    ["dump"],
])
def test_usage_errors_exit_2(argv, capsys):
    code, _, err = run(argv, capsys)
    assert code == 2 and "error" in err


def test_runtime_error_exits_1(capsys, tmp_path):
    missing_dir = tmp_path / "nope" / "out.csv"
    code, _, err = run(["survival", "--trials", "2", "--depth", "3", "--output", str(missing_dir)],
                       capsys)
    assert code == 1 and "runtime error" in err


def test_config_file_and_flag_precedence(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"command": "survival", "lambda": 0.3, "depth": 4, "trials": 7,
                               "strategy": "stationary", "seed": 5}))
    code, out, err = run(["--config", str(cfg), "--trials", "9"], capsys)
    assert code == 0
    echo = _echo(err)
    assert echo["lam"] == 0.3 and echo["trials"] == 9 and echo["depth"] == 4
    assert out.splitlines()[1].split(",")[4] == "9"
    cfg.write_text(json.dumps({"nonsense": 1}))
    assert run(["survival", "--config", str(cfg)], capsys)[0] == 2


def test_seed_from_environment(monkeypatch, capsys):
    monkeypatch.setenv("EVADE_SEED", "123")
    _, _, err = run(["survival", "--trials", "2", "--depth", "3"], capsys)
    assert _echo(err)["seed"] == 123
    _, _, err = run(["survival", "--trials", "2", "--depth", "3", "--seed", "4"], capsys)
    assert _echo(err)["seed"] == 4
    monkeypatch.setenv("EVADE_SEED", "x")
    assert run(["survival", "--trials", "2"], capsys)[0] == 2


def test_echo_reproduces_run(tmp_path, capsys):
    code, out1, err = run(["survival", "--lambda-grid", "0.05:0.5:3", "--coupled", "--depth", "6",
                           "--trials", "30", "--seed", "2", "--threads", "1"], capsys)
    assert code == 0
    cfg = tmp_path / "echo.json"
    cfg.write_text(err.strip().splitlines()[0])
    code, out2, _ = run(["--config", str(cfg)], capsys)
    assert code == 0 and out1 == out2
    assert len(out1.splitlines()) == 4


def test_json_output(capsys):
    code, out, _ = run(["survival", "--trials", "3", "--depth", "3", "--format", "json"], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["rows"][0]["trials"] == 3 and doc["format_version"] == 1


def test_phase_defaults_to_coupled_grid(capsys):
    code, out, err = run(["phase", "--depth", "5", "--trials", "10", "--threads", "1"], capsys)
    assert code == 0
    assert _echo(err)["lambda_grid"] == "0.01:1:5"
    vals = [float(r.split(",")[0]) for r in out.splitlines()[1:]]
    assert np.allclose(vals, np.geomspace(0.01, 1, 5))


def test_speed_grid(capsys):
    code, out, _ = run(["survival", "--strategy", "stationary", "--speed-grid", "0.5:2:3",
                        "--depth", "4", "--trials", "10"], capsys)
    assert code == 0 and [r.split(",")[0] for r in out.splitlines()[1:]] == ["0.5", "1.0", "2.0"]


def test_percolation_command(capsys):
    code, out, _ = run(["percolation", "--lambda-grid", "0.02:0.5:3", "--depth", "6",
                        "--trials", "20"], capsys)
    rows = list(csv.DictReader(out.splitlines()))
    assert code == 0 and len(rows) == 3
    est = [float(r["estimate"]) for r in rows]
    assert est == sorted(est, reverse=True)


def test_lambda_det_command(capsys):
    code, out, _ = run(["lambda-det", "--depth", "6", "--trials", "40", "--format", "json",
                        "--tolerance", "0.01"], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["lambda_hi"] - doc["lambda_lo"] <= 0.01
    assert "proxy" in doc["label"]
    code, _, err = run(["lambda-det", "--depth", "2", "--trials", "5",
                        "--lambda-range", "0.001:0.002"], capsys)
    assert code == 1 and "no crossing" in err


def test_lemma_command(capsys):
    code, out, _ = run(["lemma", "--lambda", "0.1", "--trials", "100", "--k", "1,5",
                        "--chi-samples", "3000"], capsys)
    doc = json.loads(out)
    assert code == 0 and [p["k"] for p in doc["psi"]] == [1, 5]
    assert doc["chi"]["samples"] == 3000


def test_dump_command(tmp_path, capsys):
    arc = tmp_path / "real.npz"
    fields = tmp_path / "fields.csv"
    code, out, _ = run(["dump", "--depth", "5", "--lambda", "0.2", "--seed", "3",
                        "--output", str(arc), "--fields", str(fields)], capsys)
    assert code == 0
    info = json.loads(out)
    real = dyn.load_realization(arc)
    assert real.n_particles == info["particles"]
    assert len(list(csv.reader(open(fields)))) == 1 + 1 + sum(4 * k for k in range(1, 6))
