from __future__ import annotations

import json
import math

import pytest

from levysim.config import Payoff, load_config, parse_config
from levysim.continuous_schemes import SchemeKind
from levysim.exceptions import ConfigError, FlowError
from levysim.helpers import (
    apply_overrides,
    build_measure,
    build_model,
    get_measure_providers,
    parse_lambda_grid,
    report_error,
    resolve_reference,
    stepper_config,
    write_output,
)
from levysim.jump_adapted import martingale_drift
from levysim.levy_measure import DATASET_I
from levysim.mc_engine import stochastic_exponential_second_moment


@pytest.fixture(scope="module")
def experiment():
    return load_config("dataset1")


def test_parse_lambda_grid():
    assert parse_lambda_grid("1:100:3") == pytest.approx((1.0, 10.0, 100.0))
    assert parse_lambda_grid("0.5, 2,8") == (0.5, 2.0, 8.0)


@pytest.mark.parametrize("spec", ["1:10", "a,b", "-1,2", ""])
def test_parse_lambda_grid_rejects(spec):
    with pytest.raises(ConfigError) as info:
        parse_lambda_grid(spec)
    assert info.value.fields == ["lambda_grid"]


def test_apply_overrides(experiment):
    config = apply_overrides(experiment, paths=123, seed=None, schemes=("nv",), substeps=2)
    assert config.run.paths == 123
    assert config.run.seed == experiment.run.seed
    assert config.run.schemes == (SchemeKind.NV,)
    assert stepper_config(config).substeps == 2
    assert experiment.run.paths == 100_000


def test_apply_overrides_lists_every_bad_value(experiment):
    with pytest.raises(ConfigError) as info:
        apply_overrides(experiment, paths=0, seed=-3, workers=0)
    assert info.value.fields == ["paths", "seed", "workers"]


def test_build_model_martingale(experiment):
    measure = build_measure(experiment.measure)
    model = build_model(experiment, measure)
    assert model.mu_Z == pytest.approx(martingale_drift(measure))
    assert model.coeffs.b_slope == 0.5
    assert model.coeffs.sigma_slope == 0.3


def test_resolve_reference(experiment):
    measure = build_measure(experiment.measure)
    second = stochastic_exponential_second_moment(0.5, 0.3, measure)
    assert resolve_reference(experiment, measure) == pytest.approx(second)
    assert second == pytest.approx(math.exp(1.09 + DATASET_I.second_moment))

    polynomial = apply_overrides(experiment, payoff=Payoff("polynomial", (1.0, 2.0, 3.0)))
    assert resolve_reference(polynomial, measure) == pytest.approx(1.0 + 2.0 * math.exp(0.5) + 3.0 * second)

    cubic = apply_overrides(experiment, payoff=Payoff("polynomial", (0.0, 0.0, 0.0, 1.0)))
    assert resolve_reference(cubic, measure) is None
    assert resolve_reference(apply_overrides(experiment, reference="none"), measure) is None
    assert resolve_reference(apply_overrides(experiment, reference="2.5"), measure) == 2.5


def test_no_closed_form_for_additive_model():
    config = parse_config(
        "[measure]\nkind = cgmy\nC = 0.1\nalpha = 1.5\nlambda_plus = 3.5\nlambda_minus = 2\n[model]\nh = constant\n",
    )
    assert resolve_reference(config, build_measure(config.measure)) is None


def test_write_output(tmp_path, capsys):
    target = tmp_path / "nested" / "out.txt"
    write_output(target, "a,b\n")
    assert target.read_text(encoding="utf-8") == "a,b\n"
    write_output(None, "hello")
    assert capsys.readouterr().out == "hello\n"


def test_report_error(capsys):
    report_error(FlowError("flow diverged", time=0.25))
    record = json.loads(capsys.readouterr().err)
    assert record == {
        "error": "FlowError",
        "module": "continuous_schemes",
        "message": "flow diverged",
        "time": 0.25,
    }


def test_measure_backends_are_discovered():
    names = {provider.name for provider in get_measure_providers(format="python")}
    assert {"cgmy", "table"} <= names

