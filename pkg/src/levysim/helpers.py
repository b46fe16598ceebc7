from __future__ import annotations

import json
import sys
from dataclasses import replace
from pathlib import Path
from typing import TYPE_CHECKING, Any

import numpy as np
from providerkit.helpers import get_providers

from levysim.config import ExperimentConfig, MeasureConfig, load_config
from levysim.continuous_schemes import SchemeKind, StepperConfig
from levysim.exceptions import ConfigError, LevysimError
from levysim.jump_adapted import LevyModel
from levysim.mc_engine import stochastic_exponential_mean, stochastic_exponential_second_moment

if TYPE_CHECKING:
    from levysim.levy_measure import LevyMeasureSpec
    from levysim.providers import LevyMeasureProvider


def get_measure_providers(
    *,
    lib_name: str = "levysim",
    query_string: str | None = None,
    attribute_search: dict[str, str] | None = None,
    format: str | None = None,
) -> Any:
    """Get the Lévy measure backends."""
    providers = get_providers(
        lib_name=lib_name,
        query_string=query_string,
        attribute_search=attribute_search,
        format=format,
    )
    if not len(providers):
        raise ConfigError(f"no measure backend matches {attribute_search or query_string}", fields=["kind"])
    return providers


def get_measure_provider(kind: str, **config: Any) -> LevyMeasureProvider:
    """Get the backend named ``kind``, configured with ``config``."""
    providers = get_measure_providers(attribute_search={"name": kind}, format="python")
    if len(providers) > 1:
        raise ConfigError(f"Expected 1 backend named {kind!r}, got {len(providers)}", fields=["kind"])
    found = providers[0]
    provider_cls = found if isinstance(found, type) else type(found)
    return provider_cls(config=config)  # type: ignore[no-any-return]


def build_measure(config: MeasureConfig) -> LevyMeasureSpec:
    return get_measure_provider(config.kind, **config.provider_config).build_measure()


def build_model(config: ExperimentConfig, measure: LevyMeasureSpec) -> LevyModel:
    model = config.model
    return LevyModel(
        coeffs=model.coefficients(),
        measure=measure,
        mu_Z=None if model.martingale else model.mu_z,
        x0=model.x0,
    )


def stepper_config(config: ExperimentConfig) -> StepperConfig:
    return StepperConfig(substeps=config.run.substeps)


def resolve_reference(config: ExperimentConfig, measure: LevyMeasureSpec) -> float | None:
    """Reference value of ``E[f(X_1)]``.

    ``auto`` gives the closed form of the stochastic exponential (``h = linear`` with a
    martingale driver) for payoffs of degree at most 2, and None otherwise.
    """
    reference = config.run.reference
    if reference == "none":
        return None
    if reference != "auto":
        return float(reference)
    model = config.model
    if model.h != "linear" or not model.martingale:
        return None
    payoff = config.run.payoff
    if payoff.kind == "identity":
        coefficients: tuple[float, ...] = (0.0, 1.0)
    elif payoff.kind == "square":
        coefficients = (0.0, 0.0, 1.0)
    else:
        coefficients = payoff.coefficients
    if len(coefficients) > 3:
        return None
    moments = [
        1.0,
        model.x0 * stochastic_exponential_mean(model.gamma0),
        model.x0**2 * stochastic_exponential_second_moment(model.gamma0, model.sigma0, measure),
    ]
    return float(sum(c * m for c, m in zip(coefficients, moments)))


def parse_lambda_grid(spec: str) -> tuple[float, ...]:
    """``a:b:points`` for a geometric grid, or a comma-separated list."""
    try:
        if ":" in spec:
            start, stop, points = spec.split(":")
            grid = tuple(float(v) for v in np.geomspace(float(start), float(stop), int(points)))
        else:
            grid = tuple(float(v) for v in spec.split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"invalid lambda grid {spec!r}", fields=["lambda_grid"]) from None
    if not grid or any(not lam > 0 for lam in grid):
        raise ConfigError(f"lambda grid {spec!r} must hold positive values", fields=["lambda_grid"])
    return grid


def apply_overrides(config: ExperimentConfig, **overrides: Any) -> ExperimentConfig:
    """Replace run settings given on the command line; None values are ignored."""
    changes = {key: value for key, value in overrides.items() if value is not None}
    bad = []
    if changes.get("paths", 2) < 2:
        bad.append("paths")
    if changes.get("seed", 0) < 0:
        bad.append("seed")
    if changes.get("substeps", 1) < 1:
        bad.append("substeps")
    if changes.get("workers", 1) < 1:
        bad.append("workers")
    if bad:
        raise ConfigError(f"invalid command-line values for {', '.join(bad)}", fields=bad)
    if "schemes" in changes:
        changes["schemes"] = tuple(SchemeKind.parse(s) for s in changes["schemes"])
    return replace(config, run=replace(config.run, **changes))


def load_experiment(source: str | Path | None) -> ExperimentConfig:
    if source is None:
        raise ConfigError("--config is required", fields=["config"])
    return load_config(source)


def write_output(path: str | Path | None, text: str) -> None:
    """Write ``text`` to ``path``, or to stdout when no path is given."""
    if path is None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
        return
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(text, encoding="utf-8")


def report_error(exc: LevysimError) -> None:
    """Print the machine-readable error record on one stderr line."""
    print(json.dumps(exc.to_record()), file=sys.stderr)
