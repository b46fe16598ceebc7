from __future__ import annotations

import csv
import json

import pytest

from levysim.approx_optimizer import approx_from_dict
from levysim.commands.approx import _approx_command
from levysim.commands.rates import _rates_command
from levysim.commands.simulate import _simulate_command
from levysim.commands.sweep import _sweep_command
from levysim.levy_measure import DATASET_I, CgmyMeasure
from levysim.mc_engine import stochastic_exponential_second_moment


def last_error(capsys) -> dict:
    lines = [line for line in capsys.readouterr().err.splitlines() if line.startswith("{")]
    return json.loads(lines[-1])


def test_approx_json_round_trip(tmp_path):
    out = tmp_path / "approx.json"
    assert _approx_command(["--config", "dataset1", "--order", "4", "--lambda", "8", "--out", str(out)])
    text = out.read_text(encoding="utf-8")
    data = json.loads(text)
    assert data["order"] == 4
    assert data["lambda"] == 8.0
    assert len(data["atoms"]) == 2
    rebuilt = approx_from_dict(data, CgmyMeasure(DATASET_I))
    assert rebuilt.to_json(data["gamma_bar"]) == text


def test_approx_to_stdout_with_bound_terms(capsys):
    assert _approx_command(["--config", "dataset2", "--order", "2", "--lambda", "4", "--bound-terms"])
    captured = capsys.readouterr()
    assert json.loads(captured.out)["order"] == 2
    terms = json.loads(captured.err.strip().splitlines()[-1])
    assert set(terms) == {"1", "2", "3"}


def test_approx_requires_order_and_lambda(capsys):
    assert not _approx_command(["--config", "dataset1", "--order", "2"])
    assert "--lambda" in capsys.readouterr().err


def test_unknown_argument(capsys):
    assert not _approx_command(["--config", "dataset1", "--colour", "red"])
    assert "Unknown argument" in capsys.readouterr().err


def test_malformed_config_reports_json(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("[measure]\nkind = cgmy\nC = 0.5\nalpha = 2.5\nlambda_plus = 3.5\nlambda_minus = 2\n")
    assert not _approx_command(["--config", str(bad), "--order", "2", "--lambda", "4"])
    record = last_error(capsys)
    assert record["error"] == "ConfigError"
    assert record["fields"] == ["alpha"]


def test_unsupported_order_is_reported(capsys):
    assert not _approx_command(["--config", "dataset1", "--order", "6", "--lambda", "4"])
    assert last_error(capsys)["error"] == "UnsupportedOrderError"


def test_rates_csv(tmp_path):
    out = tmp_path / "rates.csv"
    assert _rates_command(["--config", "dataset2", "--order", "2", "--lambda-grid", "16:1024:3", "--out", str(out)])
    rows = list(csv.reader(out.open(encoding="utf-8")))
    assert rows[0] == ["lambda", "epsilon", "J"]
    assert [float(r[0]) for r in rows[1:]] == pytest.approx([16.0, 128.0, 1024.0])


def test_rates_several_orders(tmp_path):
    out = tmp_path / "rates.csv"
    assert _rates_command(
        ["--config", "dataset1", "--order", "2", "--order", "4", "--lambda-grid", "4,400", "--out", str(out)]
    )
    assert (tmp_path / "rates_order2.csv").is_file()
    assert (tmp_path / "rates_order4.csv").is_file()


def test_simulate_estimate(tmp_path):
    out = tmp_path / "result.json"
    args = ["--config", "dataset1", "--order", "3", "--lambda", "2", "--scheme", "nv"]
    assert _simulate_command([*args, "--paths", "50", "--workers", "1", "--out", str(out)])
    result = json.loads(out.read_text(encoding="utf-8"))
    assert result["paths"] == 50
    assert result["seed"] == 20110301
    reference = stochastic_exponential_second_moment(0.5, 0.3, CgmyMeasure(DATASET_I))
    assert result["bias"] == pytest.approx(result["estimate"] - reference, rel=1e-9, abs=1e-12)


def test_simulate_trace(tmp_path):
    out = tmp_path / "trace.csv"
    args = ["--config", "dataset1", "--lambda", "8", "--scheme", "wt2", "--seed", "4", "--trace"]
    assert _simulate_command([*args, "--out", str(out)])
    rows = list(csv.reader(out.open(encoding="utf-8")))
    assert rows[0] == ["t", "x"]
    times = [float(r[0]) for r in rows[1:]]
    assert times[0] == 0.0 and times[-1] == 1.0
    assert float(rows[1][1]) == 1.0
    assert all(b > a for a, b in zip(times, times[1:]))


def test_simulate_rejects_unknown_scheme(capsys):
    assert not _simulate_command(["--config", "dataset1", "--lambda", "2", "--scheme", "klv5"])
    assert last_error(capsys)["error"] == "UnsupportedSchemeError"


def test_simulate_rejects_bad_paths(capsys):
    assert not _simulate_command(["--config", "dataset1", "--lambda", "2", "--paths", "1"])
    assert last_error(capsys)["fields"] == ["paths"]


def test_sweep_csv(tmp_path, capsys):
    out = tmp_path / "sweep.csv"
    args = ["--config", "dataset1", "--order", "2", "--scheme", "nv", "--lambda-grid", "1,4"]
    assert _sweep_command([*args, "--paths", "20", "--workers", "1", "--out", str(out)])
    rows = list(csv.reader(out.open(encoding="utf-8")))
    assert rows[0][:3] == ["lambda", "order", "scheme"]
    assert len(rows) == 3
    assert all(row[5] != "" for row in rows[1:])
    assert "|bias| slope" in capsys.readouterr().out
