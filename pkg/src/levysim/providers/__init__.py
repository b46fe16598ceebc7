from __future__ import annotations

from typing import Any

from providerkit import ProviderBase

from levysim import MEASURE_FIELDS_DESCRIPTIONS
from levysim.exceptions import ConfigError
from levysim.levy_measure import DEFAULT_QUAD_TOL, LevyMeasureSpec, MomentMode, Region, partial_moment, tail_mass


class LevyMeasureProvider(ProviderBase):
    fields_descriptions = MEASURE_FIELDS_DESCRIPTIONS
    name = "levysim"
    display_name = "Lévy measure"
    description = "Lévy measure backend"
    required_packages = ["numpy", "scipy"]
    config_keys: list[str] = ["LEVYSIM_QUAD_TOL"]
    config_defaults: dict[str, Any] = {"LEVYSIM_QUAD_TOL": DEFAULT_QUAD_TOL}
    config_required: list[str] = []
    config_prefix = "LEVYSIM"
    services = ["build_measure"]

    @staticmethod
    def _field_name(key: str) -> str:
        """``CGMY_LAMBDA_PLUS`` -> ``lambda_plus``; ``CGMY_C`` keeps its capital."""
        _, _, rest = key.partition("_")
        return rest if rest == "C" else rest.lower()

    def _get_float(self, key: str, default: float | None = None) -> float:
        value = self._get_config_or_env(key, default)
        if value is None or value == "":
            raise ConfigError(f"{self.name}: {key} is required", fields=[self._field_name(key)])
        try:
            return float(value)
        except (TypeError, ValueError):
            raise ConfigError(
                f"{self.name}: {key} = {value!r} is not a number", fields=[self._field_name(key)]
            ) from None

    @property
    def quad_tol(self) -> float:
        return self._get_float("LEVYSIM_QUAD_TOL", DEFAULT_QUAD_TOL)

    def build_measure(self) -> LevyMeasureSpec:
        """Return the configured Lévy measure.

        Raises:
            ConfigError: If a parameter is missing or out of range.
        """
        raise NotImplementedError

    def describe(self, measure: LevyMeasureSpec | None = None) -> dict[str, Any]:
        """Summary of the measure keyed like `MEASURE_FIELDS_DESCRIPTIONS`."""
        measure = measure or self.build_measure()
        summary: dict[str, Any] = {
            "kind": self.name,
            "name": measure.name,
            "support_min": measure.support[0],
            "support_max": measure.support[1],
            "quad_tol": measure.quad_tol,
            "tail_mass_1": tail_mass(measure, 1.0),
            "second_moment": partial_moment(measure, 2, Region.whole(), MomentMode.SIGNED),
        }
        return {key: summary[key] for key in self.fields_descriptions if key in summary}
