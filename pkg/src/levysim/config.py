"""Experiment configuration files.

An experiment is an INI file with four sections::

    [measure]   kind = cgmy | table, then the backend parameters
    [model]     gamma0, sigma0, h (linear | constant), x0, martingale, mu_z
    [run]       orders, schemes, lambda_grid, paths, seed, payoff, coefficients,
                reference, substeps, workers
    [output]    directory

Validation walks the whole file and reports every offending key in a single
`ConfigError`.
"""

from __future__ import annotations

import configparser
import math
from collections.abc import Callable
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

from levysim.approx_optimizer import SUPPORTED_ORDERS
from levysim.continuous_schemes import SchemeKind, SdeCoefficients
from levysim.exceptions import ConfigError, UnsupportedSchemeError

BUNDLED_CONFIGS = ("dataset1", "dataset2")
PAYOFF_KINDS = ("identity", "square", "polynomial")
H_KINDS = ("linear", "constant")

# [measure] keys that are not forwarded to the backend under its own prefix
_SHARED_MEASURE_KEYS = {"quad_tol": "LEVYSIM_QUAD_TOL"}
_POSITIVE_MEASURE_KEYS = ("C", "lambda_plus", "lambda_minus")


@dataclass(frozen=True)
class Payoff:
    """Payoff ``f`` of the estimated expectation ``E[f(X_1)]``.

    ``coefficients`` are in increasing degree and only used by ``polynomial``.
    """

    kind: str = "identity"
    coefficients: tuple[float, ...] = ()

    def __call__(self, x: float) -> float:
        if self.kind == "identity":
            return x
        if self.kind == "square":
            return x * x
        return float(np.polynomial.polynomial.polyval(x, self.coefficients))


@dataclass(frozen=True)
class MeasureConfig:
    kind: str
    provider_config: dict[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class ModelConfig:
    gamma0: float = 0.5
    sigma0: float = 0.3
    h: str = "linear"
    x0: float = 1.0
    martingale: bool = True
    mu_z: float = 0.0

    def coefficients(self) -> SdeCoefficients:
        if self.h == "linear":
            return SdeCoefficients.stochastic_exponential(self.gamma0, self.sigma0)
        return SdeCoefficients.constant(self.gamma0, self.sigma0)


@dataclass(frozen=True)
class RunConfig:
    orders: tuple[int, ...] = SUPPORTED_ORDERS
    schemes: tuple[SchemeKind, ...] = (SchemeKind.WT1, SchemeKind.WT2, SchemeKind.NV)
    lambda_grid: tuple[float, ...] = (0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0)
    paths: int = 10_000
    seed: int = 0
    payoff: Payoff = field(default_factory=Payoff)
    reference: str = "auto"
    substeps: int = 1
    workers: int | None = None


@dataclass(frozen=True)
class OutputConfig:
    directory: Path | None = None

    def path_for(self, name: str) -> Path | None:
        return None if self.directory is None else self.directory / name


@dataclass(frozen=True)
class ExperimentConfig:
    measure: MeasureConfig
    model: ModelConfig = field(default_factory=ModelConfig)
    run: RunConfig = field(default_factory=RunConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    source: str = "<string>"


class _Collector:
    """Reads typed values from a parser section and remembers every failure."""

    def __init__(self, parser: configparser.ConfigParser) -> None:
        self.parser = parser
        self.errors: list[tuple[str, str]] = []

    def fail(self, key: str, message: str) -> None:
        self.errors.append((key, message))

    def get(self, section: str, key: str, convert: Callable[[str], Any], default: Any) -> Any:
        if not self.parser.has_option(section, key):
            return default
        raw = self.parser.get(section, key)
        try:
            return convert(raw)
        except (TypeError, ValueError) as exc:
            self.fail(key, f"[{section}] {key} = {raw!r}: {exc}")
            return default

    def check(self, ok: bool, key: str, message: str) -> None:
        if not ok:
            self.fail(key, message)


def _split(raw: str) -> list[str]:
    return [item.strip() for item in raw.replace(";", ",").split(",") if item.strip()]


def _float_list(raw: str) -> tuple[float, ...]:
    return tuple(float(item) for item in _split(raw))


def _int_list(raw: str) -> tuple[int, ...]:
    return tuple(int(item) for item in _split(raw))


def _boolean(raw: str) -> bool:
    value = raw.strip().lower()
    if value in configparser.ConfigParser.BOOLEAN_STATES:
        return configparser.ConfigParser.BOOLEAN_STATES[value]
    raise ValueError(f"not a boolean: {raw!r}")


def _optional_int(raw: str) -> int | None:
    return None if raw.strip().lower() in ("", "auto", "none") else int(raw)


def _parse_measure(values: _Collector) -> MeasureConfig:
    parser = values.parser
    if not parser.has_section("measure"):
        values.fail("measure", "missing [measure] section")
        return MeasureConfig(kind="cgmy")
    kind = parser.get("measure", "kind", fallback="cgmy").strip().lower()
    provider_config: dict[str, str] = {}
    for key, raw in parser.items("measure"):
        if key == "kind":
            continue
        provider_key = _SHARED_MEASURE_KEYS.get(key, f"{kind}_{key}".upper())
        provider_config[provider_key] = raw.strip()
    if kind == "cgmy":
        for key in (*_POSITIVE_MEASURE_KEYS, "alpha"):
            value = values.get("measure", key, float, None)
            if value is None:
                if not parser.has_option("measure", key):
                    values.fail(key, f"[measure] {key} is required for cgmy")
                continue
            if key == "alpha":
                values.check(0 < value < 2, key, f"alpha must lie in (0, 2), got {value}")
            else:
                values.check(value > 0, key, f"{key} must be positive, got {value}")
    quad_tol = values.get("measure", "quad_tol", float, None)
    if quad_tol is not None:
        values.check(0 < quad_tol < 1, "quad_tol", f"quad_tol must lie in (0, 1), got {quad_tol}")
    return MeasureConfig(kind=kind, provider_config=provider_config)


def _parse_model(values: _Collector) -> ModelConfig:
    default = ModelConfig()
    model = ModelConfig(
        gamma0=values.get("model", "gamma0", float, default.gamma0),
        sigma0=values.get("model", "sigma0", float, default.sigma0),
        h=values.get("model", "h", lambda raw: raw.strip().lower(), default.h),
        x0=values.get("model", "x0", float, default.x0),
        martingale=values.get("model", "martingale", _boolean, default.martingale),
        mu_z=values.get("model", "mu_z", float, default.mu_z),
    )
    values.check(model.h in H_KINDS, "h", f"h must be one of {H_KINDS}, got {model.h!r}")
    values.check(model.sigma0 >= 0, "sigma0", f"sigma0 must be nonnegative, got {model.sigma0}")
    for key in ("gamma0", "x0", "mu_z"):
        values.check(math.isfinite(getattr(model, key)), key, f"{key} must be finite")
    return model


def _parse_schemes(values: _Collector, raw: str) -> tuple[SchemeKind, ...]:
    kinds: list[SchemeKind] = []
    for name in _split(raw):
        try:
            kinds.append(SchemeKind.parse(name))
        except UnsupportedSchemeError as exc:
            values.fail("schemes", str(exc))
    return tuple(kinds)


def _parse_run(values: _Collector) -> RunConfig:
    default = RunConfig()
    orders = values.get("run", "orders", _int_list, default.orders)
    schemes = default.schemes
    if values.parser.has_option("run", "schemes"):
        schemes = _parse_schemes(values, values.parser.get("run", "schemes"))
    lambda_grid = values.get("run", "lambda_grid", _float_list, default.lambda_grid)
    paths = values.get("run", "paths", int, default.paths)
    seed = values.get("run", "seed", int, default.seed)
    kind = values.get("run", "payoff", lambda raw: raw.strip().lower(), default.payoff.kind)
    coefficients = values.get("run", "coefficients", _float_list, ())
    reference = values.get("run", "reference", lambda raw: raw.strip().lower(), default.reference)
    substeps = values.get("run", "substeps", int, default.substeps)
    workers = values.get("run", "workers", _optional_int, default.workers)

    values.check(bool(orders), "orders", "at least one order is required")
    for order in orders:
        values.check(order in SUPPORTED_ORDERS, "orders", f"order {order} not in {SUPPORTED_ORDERS}")
    values.check(bool(schemes), "schemes", "at least one scheme is required")
    values.check(bool(lambda_grid), "lambda_grid", "lambda_grid is empty")
    for lam in lambda_grid:
        values.check(lam > 0 and math.isfinite(lam), "lambda_grid", f"intensity must be positive, got {lam}")
    values.check(paths >= 2, "paths", f"paths must be >= 2, got {paths}")
    values.check(seed >= 0, "seed", f"seed must be nonnegative, got {seed}")
    values.check(kind in PAYOFF_KINDS, "payoff", f"payoff must be one of {PAYOFF_KINDS}, got {kind!r}")
    if kind == "polynomial":
        values.check(bool(coefficients), "coefficients", "polynomial payoff needs coefficients")
    if reference not in ("auto", "none"):
        try:
            float(reference)
        except ValueError:
            values.fail("reference", f"reference must be auto, none or a number, got {reference!r}")
    values.check(substeps >= 1, "substeps", f"substeps must be >= 1, got {substeps}")
    values.check(workers is None or workers >= 1, "workers", f"workers must be >= 1, got {workers}")
    return RunConfig(
        orders=tuple(orders),
        schemes=schemes,
        lambda_grid=tuple(lambda_grid),
        paths=paths,
        seed=seed,
        payoff=Payoff(kind, tuple(coefficients)),
        reference=reference,
        substeps=substeps,
        workers=workers,
    )


def parse_config(text: str, source: str = "<string>") -> ExperimentConfig:
    """Parse and validate an experiment file.

    Raises:
        ConfigError: Listing every key that failed validation.
    """
    parser = configparser.ConfigParser()
    parser.optionxform = str  # type: ignore[assignment,method-assign]
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}", fields=["file"]) from exc
    values = _Collector(parser)
    measure = _parse_measure(values)
    model = _parse_model(values)
    run = _parse_run(values)
    directory = parser.get("output", "directory", fallback="").strip()
    output = OutputConfig(Path(directory) if directory else None)
    if values.errors:
        fields = list(dict.fromkeys(key for key, _ in values.errors))
        details = "; ".join(message for _, message in values.errors)
        raise ConfigError(f"{source}: {details}", fields=fields)
    return ExperimentConfig(measure=measure, model=model, run=run, output=output, source=source)


def read_config_text(source: str | Path) -> tuple[str, str]:
    """Text of a config given by path or by bundled name (``dataset1``, ``dataset2``)."""
    name = str(source)
    if name in BUNDLED_CONFIGS:
        bundled = resources.files("levysim").joinpath("configs").joinpath(f"{name}.cfg")
        return bundled.read_text(encoding="utf-8"), f"{name}.cfg"
    path = Path(source)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}", fields=["config"])
    return path.read_text(encoding="utf-8"), str(path)


def load_config(source: str | Path) -> ExperimentConfig:
    text, label = read_config_text(source)
    return parse_config(text, source=label)
