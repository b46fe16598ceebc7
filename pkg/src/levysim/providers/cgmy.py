from __future__ import annotations

from levysim.exceptions import ConfigError, MeasureEvaluationError
from levysim.levy_measure import CgmyMeasure, CgmyParams

from . import LevyMeasureProvider


class CgmyProvider(LevyMeasureProvider):
    name = "cgmy"
    display_name = "CGMY"
    description = "Tempered stable density C exp(-lambda_pm |y|) / |y|^(1 + alpha)"
    config_keys = ["CGMY_C", "CGMY_ALPHA", "CGMY_LAMBDA_PLUS", "CGMY_LAMBDA_MINUS", "LEVYSIM_QUAD_TOL"]
    config_required = ["CGMY_C", "CGMY_ALPHA", "CGMY_LAMBDA_PLUS", "CGMY_LAMBDA_MINUS"]

    @property
    def params(self) -> CgmyParams:
        """Parameters read from the provider config, or from the environment."""
        try:
            return CgmyParams(
                C=self._get_float("CGMY_C"),
                lambda_plus=self._get_float("CGMY_LAMBDA_PLUS"),
                lambda_minus=self._get_float("CGMY_LAMBDA_MINUS"),
                alpha=self._get_float("CGMY_ALPHA"),
            )
        except MeasureEvaluationError as exc:
            raise ConfigError(str(exc), fields=[exc.details.get("field", "measure")]) from exc

    def build_measure(self) -> CgmyMeasure:
        return CgmyMeasure(self.params, quad_tol=self.quad_tol)
