"""Jump-adapted weak simulation of ``dX = b(X) dt + sigma(X) dB + h(X-) dZ`` on ``[0, 1]``.

The small jumps of ``Z`` are replaced by the finite measure of a `FiniteApprox`.
Jump times of the approximating driver form a Poisson process of rate
``lambda_total``; between two of them the continuous part is advanced with one of
the weak schemes, and each jump applies ``x <- x + h(x) * dz``.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

from levysim.continuous_schemes import (
    EffectiveDrift,
    SchemeKind,
    SdeCoefficients,
    StepperConfig,
    effective_drift,
)
from levysim.exceptions import FlowError
from levysim.levy_measure import (
    TAIL_MASS_FLOOR,
    LevyMeasureSpec,
    MomentMode,
    Region,
    TailSampler,
    partial_moment,
)

if TYPE_CHECKING:
    from levysim.approx_optimizer import FiniteApprox
    from levysim.mc_engine import RandomStream

logger = logging.getLogger(__name__)

HORIZON = 1.0


def martingale_drift(measure: LevyMeasureSpec) -> float:
    """``mu_Z = -int_{|y|>1} y nu(dy)``, the drift making ``Z`` a martingale."""
    return -partial_moment(measure, 1, Region.outside(1.0), MomentMode.SIGNED)


@dataclass(frozen=True)
class LevyModel:
    """SDE coefficients, Lévy measure of the driver, its drift and the initial state.

    ``mu_Z`` defaults to the martingale value.
    """

    coeffs: SdeCoefficients
    measure: LevyMeasureSpec
    mu_Z: float | None = None
    x0: float = 1.0

    def __post_init__(self) -> None:
        if self.mu_Z is None:
            object.__setattr__(self, "mu_Z", martingale_drift(self.measure))

    @property
    def drift(self) -> float:
        """The resolved ``mu_Z``."""
        if self.mu_Z is None:
            return martingale_drift(self.measure)
        return self.mu_Z


@dataclass
class PathOutcome:
    x_final: float
    n_jumps: int
    trace: list[tuple[float, float]] | None = None


class JumpSizeSampler:
    """Draws from ``nu_bar / lambda_total``: atoms first by cumulative mass, then the tail."""

    def __init__(self, approx: FiniteApprox) -> None:
        self.lambda_total = approx.lambda_total
        self._locations = [atom.location for atom in approx.atoms]
        self._cumulative = list(itertools.accumulate(atom.mass for atom in approx.atoms))
        self._tail: TailSampler | None = None
        if math.isfinite(approx.cutoff) and approx.tail_intensity > TAIL_MASS_FLOOR * max(1.0, self.lambda_total):
            self._tail = approx.base.tail_sampler(approx.cutoff)

    def draw(self, stream: RandomStream) -> float:
        target = stream.random() * self.lambda_total
        for location, cumulative in zip(self._locations, self._cumulative):
            if target < cumulative:
                return location
        if self._tail is None:
            return self._locations[-1]
        return self._tail.draw(stream)


@dataclass
class PathSimulator:
    """Everything a path needs that does not depend on its random stream."""

    model: LevyModel
    approx: FiniteApprox
    scheme: SchemeKind
    config: StepperConfig = field(default_factory=StepperConfig)

    def __post_init__(self) -> None:
        self.scheme = SchemeKind.parse(self.scheme)
        self._step = self.scheme.stepper
        self.drift: EffectiveDrift = effective_drift(self.model, self.approx)
        self._jumps = JumpSizeSampler(self.approx) if self.approx.lambda_total > 0 else None
        logger.debug(
            "%s simulator, order %d, intensity %.6g, gamma_bar %.6g",
            self.scheme.value,
            self.approx.order,
            self.approx.lambda_total,
            self.drift.gamma_bar,
        )

    def _evolve(self, x: float, duration: float, t_start: float, stream: RandomStream) -> float:
        dt = duration / self.config.substeps
        try:
            for _ in range(self.config.substeps):
                x = self._step(self.model.coeffs, self.drift, x, dt, stream)
        except FlowError as exc:
            raise FlowError(f"{exc} on the leg starting at t={t_start:.6g}", time=t_start) from exc
        return x

    def _next_arrival(self, stream: RandomStream) -> float:
        if self._jumps is None:
            return math.inf
        return -math.log(1.0 - stream.random()) / self.approx.lambda_total

    def run(self, stream: RandomStream, trace: bool = False) -> PathOutcome:
        x = self.model.x0
        h = self.model.coeffs.h
        points = [(0.0, x)] if trace else None
        t_last = 0.0
        n_jumps = 0
        wait = self._next_arrival(stream)
        while wait < HORIZON - t_last:
            x = self._evolve(x, wait, t_last, stream)
            dz = self._jumps.draw(stream)  # type: ignore[union-attr]
            x = x + h(x) * dz
            t_last += wait
            n_jumps += 1
            if points is not None and t_last > points[-1][0]:
                points.append((t_last, x))
            wait = self._next_arrival(stream)
        x = self._evolve(x, HORIZON - t_last, t_last, stream)
        if points is not None:
            points.append((HORIZON, x))
        return PathOutcome(x_final=x, n_jumps=n_jumps, trace=points)


def simulate_path(
    model: LevyModel,
    approx: FiniteApprox,
    scheme: SchemeKind | str,
    config: StepperConfig,
    stream: RandomStream,
    trace: bool = False,
) -> PathOutcome:
    """Simulate ``X_1`` once.

    Each leg consumes its draws in a fixed order: the exponential waiting time, the
    scheme noise, then the jump size. With ``lambda_total = 0`` the path is a single
    continuous leg over ``[0, 1]``.
    """
    return PathSimulator(model, approx, SchemeKind.parse(scheme), config).run(stream, trace)


def expected_jump_count(approx: FiniteApprox) -> float:
    return approx.lambda_total
