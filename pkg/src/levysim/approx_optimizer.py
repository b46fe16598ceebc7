"""Optimal finite-activity approximations of a Lévy measure.

For a target jump intensity ``Lambda`` the builders return the measure
``nu_bar`` minimising ``J(nu_bar) = int |y|**n |nu - nu_bar|(dy)`` among finite
measures of total mass ``Lambda`` that match the moments of order ``2..n-1``:

- order 2 keeps the jumps larger than the cutoff;
- order 3 adds two atoms at ``+-2 eps`` carrying the small-jump variance;
- order 4 truncates at ``eps * sqrt(sqrt(2) - 1)`` and adds atoms at ``+-eps``
  matching the second and third moments.

The module also holds the moment-problem helpers (minimal intensity, Hankel
feasibility) and the rate diagnostics used to check the regular-variation
exponent ``1 - n / alpha``.
"""

from __future__ import annotations

import json
import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy import optimize

from levysim.exceptions import (
    BracketingError,
    ConsistencyError,
    DivergentMomentError,
    InfeasibleIntensityError,
    InvalidMomentsError,
    ToleranceError,
    UnsupportedOrderError,
)
from levysim.levy_measure import LevyMeasureSpec, MomentMode, Region, partial_moment, tail_mass

logger = logging.getLogger(__name__)

OA4_CUTOFF_FACTOR = math.sqrt(math.sqrt(2.0) - 1.0)
SOLVER_RTOL = 1e-8
MAX_EXPANSIONS = 200
SUPPORTED_ORDERS = (2, 3, 4)
MIN_RATE_GRID_RATIO = 100.0


@dataclass(frozen=True)
class Atom:
    location: float
    mass: float


@dataclass(frozen=True)
class FiniteApprox:
    """Finite measure ``nu_bar``: ``nu`` restricted to ``{|y| > cutoff}`` plus atoms."""

    base: LevyMeasureSpec = field(repr=False, compare=False)
    order: int
    epsilon: float
    cutoff: float
    atoms: tuple[Atom, ...]
    lambda_total: float

    @property
    def tail_intensity(self) -> float:
        return self.lambda_total - self.atom_mass

    @property
    def atom_mass(self) -> float:
        return sum(atom.mass for atom in self.atoms)

    @classmethod
    def empty(cls, base: LevyMeasureSpec, order: int = 2) -> FiniteApprox:
        """The zero measure: no jumps at all, every jump goes into the drift."""
        return cls(base=base, order=order, epsilon=math.inf, cutoff=math.inf, atoms=(), lambda_total=0.0)

    def moment(self, k: int) -> float:
        """``int y**k nu_bar(dy)`` for ``k >= 1``."""
        tail = 0.0
        if math.isfinite(self.cutoff):
            tail = partial_moment(self.base, k, Region.outside(self.cutoff), MomentMode.SIGNED)
        return tail + sum(atom.mass * atom.location**k for atom in self.atoms)

    def to_dict(self, gamma_bar: float | None = None) -> dict[str, Any]:
        return {
            "cutoff": self.cutoff,
            "epsilon": self.epsilon,
            "atoms": [{"y": atom.location, "mass": atom.mass} for atom in self.atoms],
            "lambda": self.lambda_total,
            "gamma_bar": gamma_bar,
            "order": self.order,
        }

    def to_json(self, gamma_bar: float | None = None) -> str:
        return json.dumps(self.to_dict(gamma_bar), indent=2)


def approx_from_dict(data: dict[str, Any], base: LevyMeasureSpec) -> FiniteApprox:
    """Rebuild an approximation serialised by `FiniteApprox.to_dict`."""
    return FiniteApprox(
        base=base,
        order=int(data["order"]),
        epsilon=float(data["epsilon"]),
        cutoff=float(data["cutoff"]),
        atoms=tuple(Atom(float(a["y"]), float(a["mass"])) for a in data["atoms"]),
        lambda_total=float(data["lambda"]),
    )


@dataclass(frozen=True)
class MomentVector:
    """Moments ``m[k] = int y**k nu(dy)``, indexed from ``k = 0``."""

    m: tuple[float, ...]

    @property
    def order(self) -> int:
        return len(self.m) - 1

    def hankel(self, q: int, m1: float | None = None) -> np.ndarray:
        values = list(self.m)
        if m1 is not None:
            values[1] = m1
        return np.array([[values[i + j] for j in range(q + 1)] for i in range(q + 1)], dtype=float)


def solve_epsilon(F: Callable[[float], float], Lambda: float) -> float:
    """Solve ``F(eps) = Lambda`` for a strictly decreasing ``F``.

    A bracket is found by doubling or halving from ``eps = 1``; Brent's method then
    brings the residual under ``1e-8 * Lambda``.
    """
    if not Lambda > 0:
        raise InfeasibleIntensityError(f"intensity must be positive, got {Lambda}")
    lo = hi = 1.0
    value = F(1.0)
    if value == Lambda:
        return 1.0
    expansions = 0
    if value > Lambda:
        while value > Lambda:
            expansions += 1
            if expansions > MAX_EXPANSIONS:
                raise BracketingError(f"no bracket for intensity {Lambda} above eps={hi}")
            lo, hi = hi, hi * 2.0
            value = F(hi)
    else:
        while value < Lambda:
            expansions += 1
            if expansions > MAX_EXPANSIONS:
                raise BracketingError(f"no bracket for intensity {Lambda} below eps={lo}")
            previous = value
            hi, lo = lo, lo / 2.0
            value = F(lo)
            if value < Lambda and value <= previous * (1.0 + 1e-12):
                raise InfeasibleIntensityError(
                    f"intensity {Lambda} exceeds the limit {value:.6g} of the constraint",
                    limit=value,
                )
    logger.debug("intensity %.6g bracketed in [%.6g, %.6g]", Lambda, lo, hi)
    eps = float(
        optimize.brentq(
            lambda e: F(e) - Lambda, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500
        )
    )
    residual = abs(F(eps) - Lambda)
    if residual > SOLVER_RTOL * Lambda:
        raise ToleranceError(
            f"intensity residual {residual:.3e} above {SOLVER_RTOL:g} * {Lambda}",
            estimate=eps,
            module="approx_optimizer",
        )
    return eps


def _small_moment(measure: LevyMeasureSpec, k: int, bound: float) -> float:
    return partial_moment(measure, k, Region.inside(bound), MomentMode.SIGNED)


def _check_intensity(measure: LevyMeasureSpec, approx: FiniteApprox) -> FiniteApprox:
    total = tail_mass(measure, approx.cutoff) + approx.atom_mass
    if abs(total - approx.lambda_total) > 1e-7 * approx.lambda_total:
        raise ConsistencyError(
            f"order {approx.order}: mass {total:.12g} differs from intensity {approx.lambda_total}"
        )
    if any(atom.mass < 0 for atom in approx.atoms):
        raise ConsistencyError(f"order {approx.order}: negative atom mass in {approx.atoms}")
    return approx


def build_oa2(measure: LevyMeasureSpec, Lambda: float) -> FiniteApprox:
    """Truncation: keep the jumps with ``|y| > eps`` where ``nu(|y| > eps) = Lambda``."""
    eps = solve_epsilon(lambda e: tail_mass(measure, e), Lambda)
    approx = FiniteApprox(
        base=measure, order=2, epsilon=eps, cutoff=eps, atoms=(), lambda_total=float(Lambda)
    )
    return _check_intensity(measure, approx)


def oa3_constraint(measure: LevyMeasureSpec, eps: float) -> float:
    return tail_mass(measure, eps) + _small_moment(measure, 2, eps) / (4.0 * eps**2)


def build_oa3(measure: LevyMeasureSpec, Lambda: float, match_third_moment: bool = False) -> FiniteApprox:
    """Truncation at ``eps`` plus atoms at ``+-2 eps`` carrying the small-jump variance.

    The atoms split the mass ``S / (4 eps**2)`` evenly unless ``match_third_moment`` is
    set, in which case ``alpha_2 - alpha_1 = M3 / (8 eps**3)`` also matches ``m_3``.
    """
    eps = solve_epsilon(lambda e: oa3_constraint(measure, e), Lambda)
    second = _small_moment(measure, 2, eps)
    half = second / (8.0 * eps**2)
    skew = _small_moment(measure, 3, eps) / (16.0 * eps**3) if match_third_moment else 0.0
    left, right = half - skew, half + skew
    if left < 0 or right < 0:
        raise ConsistencyError(f"order 3: negative atom mass ({left}, {right}) at eps={eps}")
    approx = FiniteApprox(
        base=measure,
        order=3,
        epsilon=eps,
        cutoff=eps,
        atoms=(Atom(-2.0 * eps, left), Atom(2.0 * eps, right)),
        lambda_total=float(Lambda),
    )
    return _check_intensity(measure, approx)


def oa4_constraint(measure: LevyMeasureSpec, eps: float) -> float:
    cut = OA4_CUTOFF_FACTOR * eps
    return tail_mass(measure, cut) + _small_moment(measure, 2, cut) / eps**2


def build_oa4(measure: LevyMeasureSpec, Lambda: float) -> FiniteApprox:
    """Truncation at ``c eps`` with ``c = sqrt(sqrt(2) - 1)`` plus atoms at ``+-eps``."""
    eps = solve_epsilon(lambda e: oa4_constraint(measure, e), Lambda)
    cut = OA4_CUTOFF_FACTOR * eps
    second = _small_moment(measure, 2, cut)
    third = _small_moment(measure, 3, cut)
    left = (-third + eps * second) / (2.0 * eps**3)
    right = (third + eps * second) / (2.0 * eps**3)
    approx = FiniteApprox(
        base=measure,
        order=4,
        epsilon=eps,
        cutoff=cut,
        atoms=(Atom(-eps, left), Atom(eps, right)),
        lambda_total=float(Lambda),
    )
    return check_hamburger_floor(_check_intensity(measure, approx))


BUILDERS: dict[int, Callable[..., FiniteApprox]] = {
    2: build_oa2,
    3: build_oa3,
    4: build_oa4,
}


def build_approx(measure: LevyMeasureSpec, order: int, Lambda: float, **options: Any) -> FiniteApprox:
    """Dispatch to the builder of the given order."""
    builder = BUILDERS.get(order)
    if builder is None:
        raise UnsupportedOrderError(
            f"order {order} is not supported; choose one of {SUPPORTED_ORDERS}", order=order
        )
    return builder(measure, Lambda, **options)


def error_functional(measure: LevyMeasureSpec, approx: FiniteApprox) -> float:
    """``J(nu_bar) = int |y|**n |nu - nu_bar|(dy)``."""
    n = approx.order
    small = partial_moment(measure, n, Region.inside(approx.cutoff), MomentMode.ABSOLUTE)
    return small + sum(atom.mass * abs(atom.location) ** n for atom in approx.atoms)


def moment_mismatch(measure: LevyMeasureSpec, approx: FiniteApprox, i: int) -> float:
    """Signed ``int y**i (nu - nu_bar)`` for ``i <= n``; absolute term for ``i = n + 1``."""
    n = approx.order
    if not 1 <= i <= n + 1:
        raise UnsupportedOrderError(f"mismatch index must lie in 1..{n + 1}, got {i}")
    if i == n + 1:
        small = partial_moment(measure, i, Region.inside(approx.cutoff), MomentMode.ABSOLUTE)
        return small + sum(atom.mass * abs(atom.location) ** i for atom in approx.atoms)
    small = partial_moment(measure, i, Region.inside(approx.cutoff), MomentMode.SIGNED)
    return small - sum(atom.mass * atom.location**i for atom in approx.atoms)


def error_bound_terms(measure: LevyMeasureSpec, approx: FiniteApprox) -> dict[int, float]:
    """Every mismatch term of the weak-error bound; divergent ones are reported as inf."""
    terms: dict[int, float] = {}
    for i in range(1, approx.order + 2):
        try:
            terms[i] = moment_mismatch(measure, approx, i)
        except DivergentMomentError:
            terms[i] = math.inf
    return terms


def minimal_intensity(moments: MomentVector, n: int) -> float:
    """Smallest total mass of a measure with moments ``m_2..m_n`` (``m_0``, ``m_1`` ignored)."""
    if n not in (2, 3, 4, 5):
        raise UnsupportedOrderError(f"minimal intensity is tabulated for n in 2..5, got {n}", order=n)
    if n < 4:
        return 0.0
    m2, m4 = moments.m[2], moments.m[4]
    if not (m2 > 0 and m4 > 0):
        raise InvalidMomentsError(f"need m2 > 0 and m4 > 0, got m2={m2}, m4={m4}")
    return m2**2 / m4


def hamburger_floor(approx: FiniteApprox) -> float:
    """Least total mass of a measure sharing ``m_2``, ``m_3``, ``m_4`` with ``nu_bar``."""
    moments = MomentVector(
        (approx.lambda_total, 0.0, approx.moment(2), approx.moment(3), approx.moment(4))
    )
    return minimal_intensity(moments, 4)


def check_hamburger_floor(approx: FiniteApprox) -> FiniteApprox:
    """Raise unless the intensity of ``approx`` reaches its `hamburger_floor`."""
    floor = hamburger_floor(approx)
    if approx.lambda_total < floor * (1.0 - SOLVER_RTOL):
        raise InfeasibleIntensityError(
            f"order {approx.order}: intensity {approx.lambda_total} below the Hamburger "
            f"minimum {floor:.6g}",
            limit=floor,
        )
    logger.debug("intensity %.6g above Hamburger minimum %.6g", approx.lambda_total, floor)
    return approx


def hankel_feasible(moments: MomentVector, q: int) -> bool:
    """Whether some ``m_1`` makes the Hankel matrix ``{m_(i+j)}_(i,j=0..q)`` nonnegative definite.

    The determinant is a concave quadratic in ``m_1``; its maximum decides feasibility.
    """
    if q < 1 or moments.order < 2 * q:
        raise InvalidMomentsError(f"need moments up to order {2 * q}, got {moments.order}")
    inner = moments.hankel(q)[1:, 1:]
    scale = max(1.0, float(np.max(np.abs(inner))))
    if np.min(np.linalg.eigvalsh(inner)) < -1e-12 * scale:
        raise InvalidMomentsError("inner Hankel matrix is not nonnegative definite")
    m0 = moments.m[0]
    if m0 < 0:
        return False
    if m0 == 0:
        return not any(moments.m[2 : 2 * q + 1])
    step = max(abs(moments.m[2]), 1.0)
    samples = [float(np.linalg.det(moments.hankel(q, m1))) for m1 in (-step, 0.0, step)]
    curvature = (samples[0] - 2.0 * samples[1] + samples[2]) / (2.0 * step**2)
    slope = (samples[2] - samples[0]) / (2.0 * step)
    best_m1 = -slope / (2.0 * curvature) if curvature < 0 else 0.0
    best = float(np.linalg.det(moments.hankel(q, best_m1)))
    tolerance = 1e-10 * max(m0, 1.0) * max(abs(float(np.linalg.det(inner))), 1e-300)
    return best >= -tolerance


def asymptotic_intensity_ratio(alpha: float, q: int) -> float:
    """Limit bound on minimal intensity over tail mass for index ``alpha`` and ``n = 2q``.

    Obtained by replacing each small-jump moment by its Karamata limit
    ``alpha / (k - alpha)`` in the Hankel determinants.
    """
    if not 0 < alpha < 2:
        raise InvalidMomentsError(f"alpha must lie in (0, 2), got {alpha}")
    size = q + 1
    limits = np.array(
        [
            [alpha / (i + j - alpha) if i + j > 1 else 0.0 for j in range(size)]
            for i in range(size)
        ]
    )
    return abs(float(np.linalg.det(limits))) / float(np.linalg.det(limits[1:, 1:]))


def loglog_slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Least-squares slope of ``log |y|`` against ``log x``."""
    slope, _ = np.polyfit(np.log(np.asarray(xs, dtype=float)), np.log(np.abs(np.asarray(ys, dtype=float))), 1)
    return float(slope)


@dataclass(frozen=True)
class RatePoint:
    lam: float
    epsilon: float
    J: float


@dataclass(frozen=True)
class RateCurve:
    order: int
    points: tuple[RatePoint, ...]
    slope: float

    def to_csv(self) -> str:
        lines = ["lambda,epsilon,J"]
        lines.extend(f"{p.lam!r},{p.epsilon!r},{p.J!r}" for p in self.points)
        return "\n".join(lines) + "\n"


def rate_curve(measure: LevyMeasureSpec, order: int, lambda_grid: Sequence[float]) -> RateCurve:
    """Error functional along an increasing intensity grid, with its log-log slope."""
    grid = [float(lam) for lam in lambda_grid]
    if len(grid) < 2 or any(b <= a for a, b in zip(grid, grid[1:])):
        raise InfeasibleIntensityError("intensity grid must be increasing with at least two points")
    if grid[-1] < MIN_RATE_GRID_RATIO * grid[0]:
        raise InfeasibleIntensityError(
            f"intensity grid {grid[0]:g}..{grid[-1]:g} spans less than two decades"
        )
    points = []
    for lam in grid:
        approx = build_approx(measure, order, lam)
        points.append(RatePoint(lam, approx.epsilon, error_functional(measure, approx)))
    slope = loglog_slope([p.lam for p in points], [p.J for p in points])
    logger.debug("order %d rate curve over %d points: slope %.4f", order, len(points), slope)
    return RateCurve(order=order, points=tuple(points), slope=slope)
