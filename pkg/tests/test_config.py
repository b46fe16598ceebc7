from __future__ import annotations

from pathlib import Path

import pytest

from levysim.config import Payoff, load_config, parse_config
from levysim.continuous_schemes import SchemeKind
from levysim.exceptions import ConfigError

MINIMAL = """
[measure]
kind = cgmy
C = 0.5
alpha = 0.5
lambda_plus = 3.5
lambda_minus = 2.0
"""


def with_run(**values: str) -> str:
    return MINIMAL + "[run]\n" + "".join(f"{key} = {value}\n" for key, value in values.items())


@pytest.mark.parametrize("name, alpha, seed", [("dataset1", 0.5, 20110301), ("dataset2", 1.5, 20110302)])
def test_bundled_configs(name, alpha, seed):
    config = load_config(name)
    assert config.measure.kind == "cgmy"
    assert float(config.measure.provider_config["CGMY_ALPHA"]) == alpha
    assert config.measure.provider_config["LEVYSIM_QUAD_TOL"] == "1e-10"
    assert config.run.orders == (2, 3, 4)
    assert config.run.schemes == (SchemeKind.WT1, SchemeKind.WT2, SchemeKind.NV)
    assert config.run.seed == seed
    assert config.run.payoff.kind == "square"
    assert config.model.martingale is True
    assert config.output.directory is None


def test_defaults():
    config = parse_config(MINIMAL)
    assert config.model.gamma0 == 0.5
    assert config.model.h == "linear"
    assert config.run.paths == 10_000
    assert config.run.reference == "auto"
    assert config.run.workers is None
    assert config.measure.provider_config["CGMY_LAMBDA_PLUS"] == "3.5"


def test_alpha_out_of_range():
    with pytest.raises(ConfigError) as info:
        parse_config(MINIMAL.replace("alpha = 0.5", "alpha = 2.5"))
    assert info.value.fields == ["alpha"]


def test_every_error_is_reported():
    text = MINIMAL.replace("C = 0.5", "C = -1").replace("lambda_minus = 2.0", "lambda_minus = abc")
    text += "[model]\nh = cubic\n[run]\npaths = 1\nschemes = wt1, wt3\norders = 2, 5\n"
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert set(info.value.fields) == {"C", "lambda_minus", "h", "paths", "schemes", "orders"}
    record = info.value.to_record()
    assert record["error"] == "ConfigError"
    assert record["module"] == "cli"


def test_missing_cgmy_parameter():
    with pytest.raises(ConfigError) as info:
        parse_config(MINIMAL.replace("lambda_plus = 3.5\n", ""))
    assert info.value.fields == ["lambda_plus"]


def test_missing_measure_section():
    with pytest.raises(ConfigError) as info:
        parse_config("[run]\npaths = 10\n")
    assert "measure" in info.value.fields


def test_malformed_file():
    with pytest.raises(ConfigError) as info:
        parse_config("C = 1\n[measure")
    assert info.value.fields == ["file"]


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError) as info:
        load_config(tmp_path / "absent.cfg")
    assert info.value.fields == ["config"]


def test_run_section():
    config = parse_config(
        with_run(
            orders="4",
            schemes="NV; wt2",
            lambda_grid="1, 10, 100",
            paths="500",
            seed="9",
            payoff="polynomial",
            coefficients="1, 0, 2",
            reference="none",
            substeps="3",
            workers="2",
        )
    )
    run = config.run
    assert run.orders == (4,)
    assert run.schemes == (SchemeKind.NV, SchemeKind.WT2)
    assert run.lambda_grid == (1.0, 10.0, 100.0)
    assert run.payoff(3.0) == pytest.approx(19.0)
    assert (run.paths, run.seed, run.substeps, run.workers) == (500, 9, 3, 2)
    assert run.reference == "none"


def test_polynomial_payoff_needs_coefficients():
    with pytest.raises(ConfigError) as info:
        parse_config(with_run(payoff="polynomial"))
    assert info.value.fields == ["coefficients"]


def test_invalid_reference():
    with pytest.raises(ConfigError) as info:
        parse_config(with_run(reference="exact"))
    assert info.value.fields == ["reference"]


def test_payoffs():
    assert Payoff("identity")(2.5) == 2.5
    assert Payoff("square")(-3.0) == 9.0
    assert Payoff("polynomial", (0.0, 1.0, 0.0, 1.0))(2.0) == pytest.approx(10.0)


def test_model_coefficients():
    text = MINIMAL + "[model]\ngamma0 = 0.2\nsigma0 = 0.1\nh = constant\nmartingale = no\nmu_z = 0.05\n"
    model = parse_config(text).model
    coeffs = model.coefficients()
    assert coeffs.b(7.0) == pytest.approx(0.2)
    assert coeffs.h(7.0) == 1.0
    assert model.martingale is False
    assert model.mu_z == 0.05


def test_output_directory():
    config = parse_config(MINIMAL + "[output]\ndirectory = results\n")
    assert config.output.path_for("sweep.csv") == Path("results") / "sweep.csv"
