from __future__ import annotations

from pathlib import Path

import numpy as np

from levysim.exceptions import ConfigError
from levysim.levy_measure import LevyMeasureSpec

from . import LevyMeasureProvider


class PiecewiseLinearDensity:
    """Linear interpolation of tabulated values, one side of the origin at a time.

    The density is zero between the origin and the innermost node of each side and
    beyond the outermost one, so a table always describes a finite measure.
    """

    def __init__(self, y: np.ndarray, density: np.ndarray) -> None:
        order = np.argsort(y)
        y, density = y[order], density[order]
        positive = y > 0
        self._right = (y[positive], density[positive])
        self._left = (-y[~positive][::-1], density[~positive][::-1])

    def __call__(self, y: float) -> float:
        nodes, values = self._right if y > 0 else self._left
        if nodes.size == 0:
            return 0.0
        return float(np.interp(abs(y), nodes, values, left=0.0, right=0.0))

    @property
    def support(self) -> tuple[float, float]:
        right = self._right[0][-1] if self._right[0].size else self._left[0][0]
        left = self._left[0][-1] if self._left[0].size else self._right[0][0]
        return (-float(left), float(right))


class TableProvider(LevyMeasureProvider):
    name = "table"
    display_name = "Tabulated density"
    description = "Lévy density interpolated linearly from a table of (y, density) pairs"
    config_keys = ["TABLE_Y", "TABLE_DENSITY", "TABLE_PATH", "LEVYSIM_QUAD_TOL"]

    @staticmethod
    def _parse_grid(raw: str, field: str) -> np.ndarray:
        try:
            return np.array([float(item) for item in str(raw).replace(";", ",").split(",") if item.strip()])
        except ValueError:
            raise ConfigError(f"table: {field} holds a value that is not a number", fields=[field]) from None

    def table(self) -> tuple[np.ndarray, np.ndarray]:
        """The ``(y, density)`` columns, validated."""
        table_path = self._get_config_or_env("TABLE_PATH", None)
        y_raw = self._get_config_or_env("TABLE_Y", None)
        density_raw = self._get_config_or_env("TABLE_DENSITY", None)
        if table_path:
            path = Path(table_path)
            if not path.is_file():
                raise ConfigError(f"table: file not found: {path}", fields=["path"])
            data = np.loadtxt(path, delimiter=None, ndmin=2)
            if data.shape[1] != 2:
                raise ConfigError(f"table: {path} must have two columns", fields=["path"])
            y, density = data[:, 0], data[:, 1]
        elif y_raw is not None and density_raw is not None:
            y = self._parse_grid(y_raw, "y")
            density = self._parse_grid(density_raw, "density")
        else:
            raise ConfigError("table: set path, or both y and density", fields=["y", "density"])
        bad: list[str] = []
        if y.size != density.size or y.size < 2:
            bad.append("density")
        if np.any(y == 0) or np.unique(y).size != y.size or not np.all(np.isfinite(y)):
            bad.append("y")
        if not np.all(np.isfinite(density)) or np.any(density < 0):
            bad.append("density")
        if bad:
            raise ConfigError(
                "table: y must be distinct nonzero nodes with one nonnegative density each",
                fields=list(dict.fromkeys(bad)),
            )
        return y, density

    def build_measure(self) -> LevyMeasureSpec:
        density = PiecewiseLinearDensity(*self.table())
        return LevyMeasureSpec(density, support_hint=density.support, quad_tol=self.quad_tol, name="table")
