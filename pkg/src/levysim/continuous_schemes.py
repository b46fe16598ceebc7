"""One-step weak schemes for the continuous SDE between jumps.

Between two jumps the state follows ``dY = b_bar(Y) dt + sigma(Y) dB`` where
``b_bar = b + gamma_bar * h`` compensates the drift removed with the small
jumps. Three steppers are available:

- ``wt1``: Euler-Maruyama, weak order 1;
- ``wt2``: simplified order-2 weak Taylor scheme driven by a three-point variable;
- ``nv``: Ninomiya-Victoir splitting ``exp(V0 dt/2) exp(V1 sqrt(dt) xi) exp(V0 dt/2)``
  with the Stratonovich-corrected drift ``V0 = b_bar - sigma sigma' / 2``.

With a single Brownian driver both Ninomiya-Victoir orderings coincide, so no
coin flip is drawn.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING

from levysim.exceptions import FlowError, UnsupportedSchemeError
from levysim.levy_measure import MomentMode, Region, partial_moment

if TYPE_CHECKING:
    from levysim.approx_optimizer import FiniteApprox
    from levysim.jump_adapted import LevyModel
    from levysim.mc_engine import RandomStream

logger = logging.getLogger(__name__)

Field = Callable[[float], float]

FD_STEP = 1e-5
FD_STEP_SECOND = 1e-3
FLOW_STEP_FRACTION = 0.25
_THREE_POINT_TAIL = 1.0 / 6.0


@dataclass(frozen=True)
class ConstantField:
    value: float

    def __call__(self, x: float) -> float:  # noqa: ARG002
        return self.value


@dataclass(frozen=True)
class LinearField:
    """``x -> slope * x``."""

    slope: float

    def __call__(self, x: float) -> float:
        return self.slope * x


def central_difference(f: Field, step: float = FD_STEP) -> Field:
    def derivative(x: float) -> float:
        h = step * (1.0 + abs(x))
        return (f(x + h) - f(x - h)) / (2.0 * h)

    return derivative


def second_difference(f: Field, step: float = FD_STEP_SECOND) -> Field:
    def derivative(x: float) -> float:
        h = step * (1.0 + abs(x))
        return (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h)

    return derivative


@dataclass(frozen=True)
class SdeCoefficients:
    """Coefficients ``b``, ``sigma``, ``h`` with their first two derivatives.

    The ``*_slope`` fields are linearity hints: when set, the coefficient is known to
    be ``x -> slope * x`` and flows along it are taken in closed form.
    """

    b: Field
    db: Field
    d2b: Field
    sigma: Field
    dsigma: Field
    d2sigma: Field
    h: Field
    dh: Field
    d2h: Field
    b_slope: float | None = None
    sigma_slope: float | None = None
    h_slope: float | None = None

    @classmethod
    def from_functions(
        cls,
        b: Field,
        sigma: Field,
        h: Field,
        *,
        db: Field | None = None,
        d2b: Field | None = None,
        dsigma: Field | None = None,
        d2sigma: Field | None = None,
        dh: Field | None = None,
        d2h: Field | None = None,
    ) -> SdeCoefficients:
        """Build coefficients, filling missing derivatives by central differences."""
        return cls(
            b=b,
            db=db or central_difference(b),
            d2b=d2b or second_difference(b),
            sigma=sigma,
            dsigma=dsigma or central_difference(sigma),
            d2sigma=d2sigma or second_difference(sigma),
            h=h,
            dh=dh or central_difference(h),
            d2h=d2h or second_difference(h),
        )

    @classmethod
    def linear(cls, b_slope: float, sigma_slope: float, h_slope: float) -> SdeCoefficients:
        zero = ConstantField(0.0)
        return cls(
            b=LinearField(b_slope),
            db=ConstantField(b_slope),
            d2b=zero,
            sigma=LinearField(sigma_slope),
            dsigma=ConstantField(sigma_slope),
            d2sigma=zero,
            h=LinearField(h_slope),
            dh=ConstantField(h_slope),
            d2h=zero,
            b_slope=b_slope,
            sigma_slope=sigma_slope,
            h_slope=h_slope,
        )

    @classmethod
    def stochastic_exponential(cls, gamma0: float, sigma0: float) -> SdeCoefficients:
        """``b = gamma0 * x``, ``sigma = sigma0 * x``, ``h = x``."""
        return cls.linear(gamma0, sigma0, 1.0)

    @classmethod
    def constant(cls, drift: float, volatility: float, jump_scale: float = 1.0) -> SdeCoefficients:
        """Additive noise: ``b``, ``sigma`` and ``h`` do not depend on the state."""
        zero = ConstantField(0.0)
        return cls(
            b=ConstantField(drift),
            db=zero,
            d2b=zero,
            sigma=ConstantField(volatility),
            dsigma=zero,
            d2sigma=zero,
            h=ConstantField(jump_scale),
            dh=zero,
            d2h=zero,
        )


@dataclass(frozen=True)
class EffectiveDrift:
    """Drift ``b_bar = b + gamma_bar * h`` seen by the continuous part."""

    gamma_bar: float
    coeffs: SdeCoefficients

    def b_bar(self, x: float) -> float:
        return self.coeffs.b(x) + self.gamma_bar * self.coeffs.h(x)

    def db_bar(self, x: float) -> float:
        return self.coeffs.db(x) + self.gamma_bar * self.coeffs.dh(x)

    def d2b_bar(self, x: float) -> float:
        return self.coeffs.d2b(x) + self.gamma_bar * self.coeffs.d2h(x)

    @property
    def slope(self) -> float | None:
        c = self.coeffs
        if c.b_slope is None or c.h_slope is None:
            return None
        return c.b_slope + self.gamma_bar * c.h_slope

    def stratonovich(self, x: float) -> float:
        return self.b_bar(x) - 0.5 * self.coeffs.sigma(x) * self.coeffs.dsigma(x)

    @property
    def stratonovich_slope(self) -> float | None:
        slope = self.slope
        if slope is None or self.coeffs.sigma_slope is None:
            return None
        return slope - 0.5 * self.coeffs.sigma_slope**2


def effective_drift(model: LevyModel, approx: FiniteApprox) -> EffectiveDrift:
    """``gamma_bar = mu_Z + int_{|y|>1} y nu(dy) - int y nu_bar(dy)``."""
    measure = model.measure
    big = partial_moment(measure, 1, Region.outside(1.0), MomentMode.SIGNED)
    gamma_bar = model.drift + big - approx.moment(1)
    logger.debug("effective drift for order %d at %.6g: %.6g", approx.order, approx.lambda_total, gamma_bar)
    return EffectiveDrift(gamma_bar=gamma_bar, coeffs=model.coeffs)


def wt1_step(
    coeffs: SdeCoefficients, drift: EffectiveDrift, x: float, dt: float, stream: RandomStream
) -> float:
    xi = stream.standard_normal()
    return x + drift.b_bar(x) * dt + coeffs.sigma(x) * math.sqrt(dt) * xi


def three_point(dt: float, stream: RandomStream) -> float:
    """``+-sqrt(3 dt)`` with probability 1/6 each, 0 otherwise."""
    u = stream.random()
    if u < _THREE_POINT_TAIL:
        return math.sqrt(3.0 * dt)
    if u < 2.0 * _THREE_POINT_TAIL:
        return -math.sqrt(3.0 * dt)
    return 0.0


def wt2_step(
    coeffs: SdeCoefficients, drift: EffectiveDrift, x: float, dt: float, stream: RandomStream
) -> float:
    w = three_point(dt, stream)
    bb = drift.b_bar(x)
    dbb = drift.db_bar(x)
    d2bb = drift.d2b_bar(x)
    s = coeffs.sigma(x)
    ds = coeffs.dsigma(x)
    d2s = coeffs.d2sigma(x)
    return (
        x
        + bb * dt
        + s * w
        + 0.5 * s * ds * (w * w - dt)
        + 0.5 * dbb * s * w * dt
        + 0.5 * (bb * dbb + 0.5 * d2bb * s * s) * dt * dt
        + 0.5 * (bb * ds + 0.5 * d2s * s * s) * w * dt
    )


def ode_flow(
    field: Field,
    x: float,
    t: float,
    h_max: float | None = None,
    slope: float | None = None,
) -> float:
    """Time-``t`` solution of ``dy/ds = field(y)`` from ``x``; ``t`` may be negative.

    Classical RK4 with ``ceil(|t| / h_max)`` substeps, or ``x * exp(slope * t)`` when the
    caller knows the field is ``y -> slope * y``.
    """
    if t == 0.0:
        return x
    if slope is not None:
        y = x * math.exp(slope * t)
    else:
        h_max = h_max if h_max is not None else FLOW_STEP_FRACTION * abs(t)
        n = max(1, math.ceil(abs(t) / h_max))
        h = t / n
        y = x
        for _ in range(n):
            k1 = field(y)
            k2 = field(y + 0.5 * h * k1)
            k3 = field(y + 0.5 * h * k2)
            k4 = field(y + h * k3)
            y = y + h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
            if not math.isfinite(y):
                break
    if not math.isfinite(y):
        raise FlowError(f"flow diverged from x={x} over t={t}")
    return y


def nv_step(
    coeffs: SdeCoefficients, drift: EffectiveDrift, x: float, dt: float, stream: RandomStream
) -> float:
    xi = stream.standard_normal()
    h_max = FLOW_STEP_FRACTION * dt
    v0_slope = drift.stratonovich_slope
    y = ode_flow(drift.stratonovich, x, 0.5 * dt, h_max, v0_slope)
    y = ode_flow(coeffs.sigma, y, math.sqrt(dt) * xi, h_max, coeffs.sigma_slope)
    return ode_flow(drift.stratonovich, y, 0.5 * dt, h_max, v0_slope)


Stepper = Callable[[SdeCoefficients, EffectiveDrift, float, float, "RandomStream"], float]

_REJECTED = {"wt3", "klv3", "klv5"}


class SchemeKind(str, Enum):
    WT1 = "wt1"
    WT2 = "wt2"
    NV = "nv"

    @classmethod
    def parse(cls, name: str | SchemeKind) -> SchemeKind:
        if isinstance(name, SchemeKind):
            return name
        key = str(name).strip().lower()
        if key in _REJECTED:
            raise UnsupportedSchemeError(
                f"scheme {key!r} is not implemented; use wt1, wt2 or nv", scheme=key
            )
        try:
            return cls(key)
        except ValueError:
            raise UnsupportedSchemeError(f"unknown scheme {name!r}", scheme=key) from None

    @property
    def stepper(self) -> Stepper:
        return STEPPERS[self]


STEPPERS: dict[SchemeKind, Stepper] = {
    SchemeKind.WT1: wt1_step,
    SchemeKind.WT2: wt2_step,
    SchemeKind.NV: nv_step,
}


@dataclass(frozen=True)
class StepperConfig:
    """Number of equal scheme steps taken on each inter-jump leg."""

    substeps: int = 1

    def __post_init__(self) -> None:
        if self.substeps < 1:
            raise UnsupportedSchemeError(f"substeps must be >= 1, got {self.substeps}")
