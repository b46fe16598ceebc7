"""Infinite-activity Lévy measures: tail masses, partial moments and tail sampling.

Two kinds of measures are provided:

- `LevyMeasureSpec`, a generic measure described by its density. Every
  integral is computed by adaptive Gauss-Kronrod quadrature (QUADPACK through
  `scipy.integrate.quad`) over geometrically split pieces.
- `CgmyMeasure`, the tempered stable density
  ``C * exp(-lambda_pm |y|) / |y|**(1 + alpha)``, which answers tail masses and
  partial moments through incomplete gamma functions and falls back to the
  generic quadrature when asked to.

Regions are described with `Region`: ``inside(a)`` is ``{0 < |y| <= a}``,
``outside(a)`` is ``{|y| > a}`` and ``whole()`` is the real line minus the
origin.
"""

from __future__ import annotations

import bisect
import logging
import math
import threading
from collections import OrderedDict
from collections.abc import Callable
from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING, Literal

import numpy as np
from scipy import integrate, optimize, special

from levysim.exceptions import (
    DegenerateTailError,
    DivergentMomentError,
    MeasureEvaluationError,
    ToleranceError,
)

if TYPE_CHECKING:
    from levysim.mc_engine import RandomStream

logger = logging.getLogger(__name__)

DEFAULT_QUAD_TOL = 1e-10
SAMPLER_GRID_POINTS = 2048
SAMPLER_CACHE_SIZE = 64
SUPPORT_TAIL_RATIO = 1e-12
TAIL_MASS_FLOOR = 1e-14

_QUAD_LIMIT = 200
_ORIGIN_DECADES = 12


class MomentMode(str, Enum):
    SIGNED = "signed"
    ABSOLUTE = "absolute"


@dataclass(frozen=True)
class Region:
    """Integration region, symmetric around the origin."""

    kind: Literal["inside", "outside", "whole"]
    bound: float = 0.0

    def __post_init__(self) -> None:
        if self.kind != "whole" and not self.bound > 0:
            raise MeasureEvaluationError(f"region bound must be positive, got {self.bound}")

    @classmethod
    def inside(cls, bound: float) -> Region:
        return cls("inside", float(bound))

    @classmethod
    def outside(cls, bound: float) -> Region:
        return cls("outside", float(bound))

    @classmethod
    def whole(cls) -> Region:
        return cls("whole")

    @property
    def contains_origin(self) -> bool:
        return self.kind != "outside"


@dataclass(frozen=True)
class CgmyParams:
    """Parameters of the CGMY Lévy density."""

    C: float
    lambda_plus: float
    lambda_minus: float
    alpha: float

    def __post_init__(self) -> None:
        if not self.C > 0:
            raise MeasureEvaluationError(f"C must be positive, got {self.C}", field="C")
        if not self.lambda_plus > 0:
            raise MeasureEvaluationError(
                f"lambda_plus must be positive, got {self.lambda_plus}", field="lambda_plus"
            )
        if not self.lambda_minus > 0:
            raise MeasureEvaluationError(
                f"lambda_minus must be positive, got {self.lambda_minus}", field="lambda_minus"
            )
        if not 0 < self.alpha < 2:
            raise MeasureEvaluationError(
                f"alpha must lie in (0, 2), got {self.alpha}", field="alpha"
            )

    @property
    def second_moment(self) -> float:
        """Closed form of the integral of y**2 over the whole line."""
        return (
            self.C
            * special.gamma(2.0 - self.alpha)
            * (self.lambda_plus ** (self.alpha - 2.0) + self.lambda_minus ** (self.alpha - 2.0))
        )


DATASET_I = CgmyParams(C=0.5, lambda_plus=3.5, lambda_minus=2.0, alpha=0.5)
DATASET_II = CgmyParams(C=0.1, lambda_plus=3.5, lambda_minus=2.0, alpha=1.5)


def upper_incomplete_gamma(s: float, x: float) -> float:
    """Non-normalised upper incomplete gamma function for any real ``s`` and ``x > 0``.

    Negative orders are reached through ``Gamma(s, x) = (Gamma(s + 1, x) - x**s e**-x) / s``.
    """
    if s > 0:
        return float(special.gamma(s) * special.gammaincc(s, x))
    if s == 0:
        return float(special.exp1(x))
    return (upper_incomplete_gamma(s + 1.0, x) - x**s * math.exp(-x)) / s


def _geometric_breaks(lo: float, hi: float) -> list[float]:
    """Breakpoints splitting ``[lo, hi]`` into pieces at most one decade wide."""
    if lo > 0:
        pieces = max(1, math.ceil(math.log10(hi / lo)))
        return [float(v) for v in np.geomspace(lo, hi, pieces + 1)]
    inner = hi * 10.0 ** (-_ORIGIN_DECADES)
    return [0.0] + [float(v) for v in np.geomspace(inner, hi, _ORIGIN_DECADES + 1)]


class LevyMeasureSpec:
    """Lévy measure given by a density on the real line minus the origin.

    Args:
        density: Callable ``y -> density``; must be finite and nonnegative for ``y != 0``.
        support_hint: ``(y_min, y_max)`` beyond which the remaining mass is negligible.
            Computed from the tails when omitted.
        quad_tol: Relative tolerance of every quadrature.
        name: Label used in logs and JSON output.
    """

    def __init__(
        self,
        density: Callable[[float], float],
        support_hint: tuple[float, float] | None = None,
        quad_tol: float = DEFAULT_QUAD_TOL,
        name: str = "density",
    ) -> None:
        self._density = density
        self.quad_tol = float(quad_tol)
        self.name = name
        self._samplers: OrderedDict[float, TailSampler] = OrderedDict()
        self._sampler_lock = threading.Lock()
        if support_hint is None:
            support_hint = self._default_support()
        y_min, y_max = support_hint
        if not y_min < 0 < y_max:
            raise MeasureEvaluationError(f"support hint must straddle 0, got {support_hint}")
        self.support = (float(y_min), float(y_max))

    def __repr__(self) -> str:
        return f"{type(self).__name__}(name={self.name!r}, support={self.support})"

    def __getstate__(self) -> dict[str, object]:
        state = self.__dict__.copy()
        del state["_sampler_lock"]
        state["_samplers"] = OrderedDict()
        return state

    def __setstate__(self, state: dict[str, object]) -> None:
        self.__dict__.update(state)
        self._sampler_lock = threading.Lock()

    def density(self, y: float) -> float:
        value = float(self._density(y))
        if not math.isfinite(value) or value < 0:
            raise MeasureEvaluationError(
                f"density of {self.name} is {value} at y={y}", y=y
            )
        return value

    def edge(self, sign: int) -> float:
        """Distance from the origin to the end of the support on one side."""
        return self.support[1] if sign > 0 else -self.support[0]

    # Closed-form hooks: subclasses return None when they have nothing better.

    def closed_tail_mass(self, cutoff: float) -> float | None:  # noqa: ARG002
        return None

    def closed_partial_moment(  # noqa: ARG002
        self, k: int, region: Region, mode: MomentMode
    ) -> float | None:
        return None

    def closed_side_tail(self, cutoff: float, sign: int) -> float | None:  # noqa: ARG002
        return None

    # Quadrature

    def _quad(self, func: Callable[[float], float], lo: float, hi: float) -> float:
        result = integrate.quad(
            func, lo, hi, epsabs=0.0, epsrel=self.quad_tol, limit=_QUAD_LIMIT, full_output=1
        )
        value, abserr = float(result[0]), float(result[1])
        if not math.isfinite(value):
            raise MeasureEvaluationError(
                f"non-finite integral of {self.name} on [{lo}, {hi}]", lo=lo, hi=hi
            )
        if len(result) == 4 and abserr > 1e-6 * abs(value) + 1e-300:
            raise ToleranceError(
                f"quadrature of {self.name} on [{lo}, {hi}] stopped at error {abserr:.3e}",
                estimate=value,
            )
        return value

    def side_integral(self, func: Callable[[float], float], lo: float, hi: float) -> float:
        """Integral of ``func`` over ``[lo, hi]`` (``0 <= lo < hi``), split by decades."""
        if hi <= lo:
            return 0.0
        breaks = _geometric_breaks(lo, hi)
        total = 0.0
        estimate = 0.0
        for a, b in zip(breaks[:-1], breaks[1:]):
            try:
                piece = self._quad(func, a, b)
            except ToleranceError as exc:
                raise ToleranceError(str(exc), estimate=estimate + exc.estimate) from exc
            total += piece
            estimate = total
        return total

    def side_tail(self, cutoff: float, sign: int) -> float:
        """Mass of ``{sign * y > cutoff}``."""
        closed = self.closed_side_tail(cutoff, sign)
        if closed is not None:
            return closed
        return self.side_integral(lambda t: self.density(sign * t), cutoff, self.edge(sign))

    def interval_masses(self, grid: np.ndarray, sign: int) -> np.ndarray:
        """Masses of consecutive intervals ``[grid[j], grid[j + 1]]`` on one side."""
        if self.closed_side_tail(float(grid[0]), sign) is not None:
            tails = np.array([self.closed_side_tail(float(g), sign) for g in grid])
            return np.maximum(-np.diff(tails), 0.0)
        return np.array(
            [
                self._quad(lambda t: self.density(sign * t), float(a), float(b))
                for a, b in zip(grid[:-1], grid[1:])
            ]
        )

    def _default_support(self) -> tuple[float, float]:
        """Smallest symmetric bound holding all but a 1e-12 share of the mass beyond 1."""

        def beyond(y: float) -> float:
            closed = self.closed_tail_mass(y)
            if closed is not None:
                return closed
            right = integrate.quad(lambda t: float(self._density(t)), y, np.inf, limit=_QUAD_LIMIT)[0]
            left = integrate.quad(lambda t: float(self._density(-t)), y, np.inf, limit=_QUAD_LIMIT)[0]
            return float(right + left)

        reference = beyond(1.0)
        if not reference > 0:
            raise MeasureEvaluationError(
                f"{self.name} has no mass beyond 1; pass support_hint explicitly"
            )
        target = SUPPORT_TAIL_RATIO * reference
        hi = 2.0
        for _ in range(200):
            if beyond(hi) < target:
                break
            hi *= 2.0
        else:
            raise MeasureEvaluationError(f"tails of {self.name} do not decay")
        y_max = optimize.brentq(
            lambda y: math.log(max(beyond(y), 1e-300)) - math.log(target), 1.0, hi, xtol=1e-8
        )
        logger.debug("support of %s set to +-%.6g", self.name, y_max)
        return (-float(y_max), float(y_max))

    def tail_sampler(self, cutoff: float) -> TailSampler:
        """Inverse-CDF sampler of the measure restricted to ``{|y| > cutoff}``.

        Built once per cutoff and shared by concurrent callers; the least recently used
        table is dropped once `SAMPLER_CACHE_SIZE` cutoffs are held.
        """
        key = float(cutoff)
        with self._sampler_lock:
            sampler = self._samplers.get(key)
            if sampler is None:
                sampler = TailSampler(self, key)
                self._samplers[key] = sampler
                if len(self._samplers) > SAMPLER_CACHE_SIZE:
                    self._samplers.popitem(last=False)
            else:
                self._samplers.move_to_end(key)
            return sampler


class CgmyMeasure(LevyMeasureSpec):
    """CGMY Lévy measure with incomplete-gamma closed forms.

    Args:
        params: CGMY parameters.
        quad_tol: Relative tolerance of the quadrature fallback.
        use_closed_form: When False every integral goes through the generic quadrature,
            which is how the closed forms are cross-checked.
    """

    def __init__(
        self,
        params: CgmyParams,
        quad_tol: float = DEFAULT_QUAD_TOL,
        use_closed_form: bool = True,
    ) -> None:
        self.params = params
        self.use_closed_form = use_closed_form
        super().__init__(self._cgmy_density, quad_tol=quad_tol, name="cgmy")

    def _cgmy_density(self, y: float) -> float:
        p = self.params
        rate = p.lambda_plus if y > 0 else p.lambda_minus
        return p.C * math.exp(-rate * abs(y)) / abs(y) ** (1.0 + p.alpha)

    def _rate(self, sign: int) -> float:
        return self.params.lambda_plus if sign > 0 else self.params.lambda_minus

    def closed_side_tail(self, cutoff: float, sign: int) -> float | None:
        if not self.use_closed_form:
            return None
        p = self.params
        rate = self._rate(sign)
        return p.C * rate**p.alpha * upper_incomplete_gamma(-p.alpha, rate * cutoff)

    def closed_tail_mass(self, cutoff: float) -> float | None:
        if not self.use_closed_form:
            return None
        return float(self.closed_side_tail(cutoff, 1)) + float(self.closed_side_tail(cutoff, -1))

    def _side_moment(self, k: int, region: Region, sign: int) -> float:
        """Integral of ``|y|**k`` over one side of ``region``."""
        p = self.params
        rate = self._rate(sign)
        order = k - p.alpha
        scale = p.C * rate ** (-order)
        if region.kind == "outside":
            return scale * upper_incomplete_gamma(order, rate * region.bound)
        if order <= 0:
            raise DivergentMomentError(
                f"moment of order {k} diverges at the origin for alpha={p.alpha}", k=k
            )
        if region.kind == "whole":
            return scale * float(special.gamma(order))
        return scale * float(special.gamma(order) * special.gammainc(order, rate * region.bound))

    def closed_partial_moment(self, k: int, region: Region, mode: MomentMode) -> float | None:
        if not self.use_closed_form:
            return None
        right = self._side_moment(k, region, 1)
        left = self._side_moment(k, region, -1)
        if mode is MomentMode.SIGNED and k % 2 == 1:
            return right - left
        return right + left


def tail_mass(measure: LevyMeasureSpec, cutoff: float) -> float:
    """Mass of ``{|y| > cutoff}``."""
    if not cutoff > 0:
        raise MeasureEvaluationError(f"cutoff must be positive, got {cutoff}")
    closed = measure.closed_tail_mass(cutoff)
    if closed is not None:
        return closed
    return measure.side_tail(cutoff, 1) + measure.side_tail(cutoff, -1)


def _diverges_at_origin(integrand: Callable[[float], float], bound: float) -> bool:
    """True when ``y * integrand(y)`` fails to vanish as ``y`` decreases to 0."""
    near = bound * 1e-10
    far = bound * 1e-8
    near_value = near * abs(integrand(near))
    far_value = far * abs(integrand(far))
    return near_value > 0 and near_value >= far_value


def partial_moment(
    measure: LevyMeasureSpec,
    k: int,
    region: Region,
    mode: MomentMode | str = MomentMode.SIGNED,
) -> float:
    """Integral of ``y**k`` (signed) or ``|y|**k`` (absolute) over ``region``."""
    if k < 1 or int(k) != k:
        raise MeasureEvaluationError(f"moment order must be an integer >= 1, got {k}")
    k = int(k)
    mode = MomentMode(mode)
    closed = measure.closed_partial_moment(k, region, mode)
    if closed is not None:
        return closed

    total = 0.0
    for sign in (1, -1):
        weight = float(sign**k) if mode is MomentMode.SIGNED else 1.0
        edge = measure.edge(sign)

        def integrand(t: float, sign: int = sign) -> float:
            return t**k * measure.density(sign * t)

        if region.kind == "outside":
            lo, hi = region.bound, edge
        elif region.kind == "inside":
            lo, hi = 0.0, min(region.bound, edge)
        else:
            lo, hi = 0.0, edge
        if hi <= lo:
            continue
        if lo == 0.0 and _diverges_at_origin(integrand, hi):
            raise DivergentMomentError(
                f"moment of order {k} of {measure.name} diverges at the origin", k=k
            )
        total += weight * measure.side_integral(integrand, lo, hi)
    return total


def karamata_limit(alpha: float, p: float) -> float:
    """Limit of `karamata_ratio` for a measure regularly varying with index alpha."""
    if not p > alpha:
        raise MeasureEvaluationError(f"Karamata limit needs p > alpha, got p={p}, alpha={alpha}")
    return alpha / (p - alpha)


def karamata_ratio(measure: LevyMeasureSpec, p: int, eps: float) -> float:
    """``int_{|y|<=eps} |y|**p nu(dy) / (eps**p * nu(|y| > eps))``."""
    inner = partial_moment(measure, p, Region.inside(eps), MomentMode.ABSOLUTE)
    return inner / (eps**p * tail_mass(measure, eps))


class TailSampler:
    """Tabulated inverse CDF of a measure restricted to ``{|y| > cutoff}``.

    Each side gets a geometric grid of `SAMPLER_GRID_POINTS` nodes from the cutoff to
    the edge of the support; the CDF is interpolated linearly between nodes.
    """

    def __init__(self, measure: LevyMeasureSpec, cutoff: float, points: int = SAMPLER_GRID_POINTS) -> None:
        if not cutoff > 0:
            raise DegenerateTailError(f"cutoff must be positive, got {cutoff}")
        self.cutoff = float(cutoff)
        self._grids: dict[int, list[float]] = {}
        self._cumulative: dict[int, list[float]] = {}
        self._side_mass: dict[int, float] = {}
        for sign in (-1, 1):
            edge = measure.edge(sign)
            if edge <= cutoff:
                self._side_mass[sign] = 0.0
                continue
            grid = np.geomspace(cutoff, edge, points)
            cumulative = np.concatenate(([0.0], np.cumsum(measure.interval_masses(grid, sign))))
            self._grids[sign] = grid.tolist()
            self._cumulative[sign] = cumulative.tolist()
            self._side_mass[sign] = float(cumulative[-1])
        self.total_mass = self._side_mass[-1] + self._side_mass[1]
        if not self.total_mass > TAIL_MASS_FLOOR:
            raise DegenerateTailError(
                f"tail of {measure.name} beyond {cutoff} holds mass {self.total_mass:.3e}",
                cutoff=cutoff,
            )
        logger.debug(
            "tail table for %s at cutoff %.6g: mass %.6g", measure.name, cutoff, self.total_mass
        )

    def draw(self, stream: RandomStream) -> float:
        target = stream.random() * self.total_mass
        if target < self._side_mass[-1]:
            sign = -1
        else:
            sign = 1
            target -= self._side_mass[-1]
        grid = self._grids[sign]
        cumulative = self._cumulative[sign]
        j = min(max(bisect.bisect_right(cumulative, target) - 1, 0), len(grid) - 2)
        width = cumulative[j + 1] - cumulative[j]
        frac = (target - cumulative[j]) / width if width > 0 else 0.0
        size = grid[j] + frac * (grid[j + 1] - grid[j])
        if size <= self.cutoff:
            size = math.nextafter(self.cutoff, math.inf)
        return sign * size


def sample_tail(measure: LevyMeasureSpec, cutoff: float, stream: RandomStream) -> float:
    """Draw one jump from ``nu`` restricted to ``{|y| > cutoff}``, normalised."""
    return measure.tail_sampler(cutoff).draw(stream)
