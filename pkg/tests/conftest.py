from __future__ import annotations

import math
from collections.abc import Iterable

import numpy as np
import pytest

from levysim.levy_measure import DATASET_I, DATASET_II, CgmyMeasure, LevyMeasureSpec


class ScriptedStream:
    """Random stream replaying fixed uniforms and normals, in order."""

    def __init__(self, uniforms: Iterable[float] = (), normals: Iterable[float] = ()) -> None:
        self._uniforms = list(uniforms)
        self._normals = list(normals)

    def random(self) -> float:
        return self._uniforms.pop(0)

    def standard_normal(self) -> float:
        return self._normals.pop(0)

    @property
    def exhausted(self) -> bool:
        return not self._uniforms and not self._normals


def _uniform_density(y: float) -> float:
    return 1.0 if abs(y) <= 1.0 else 0.0


@pytest.fixture
def uniform_measure() -> LevyMeasureSpec:
    """Density 1 on [-1, 1]: every optimal approximation is known in closed form."""
    return LevyMeasureSpec(_uniform_density, support_hint=(-1.0, 1.0), name="uniform")


@pytest.fixture(scope="session")
def dataset1() -> CgmyMeasure:
    return CgmyMeasure(DATASET_I)


@pytest.fixture(scope="session")
def dataset2() -> CgmyMeasure:
    return CgmyMeasure(DATASET_II)


def linear_scheme_mean(
    b_bar: float, lam: float, jump_mean: float, leg_factor: tuple[float, ...], x0: float = 1.0
) -> float:
    """Exact ``E[X_1]`` of a jump-adapted scheme for a linear SDE, over its own randomness.

    Each leg of length ``s`` multiplies the mean by ``sum(c_k (b_bar s)**k)`` with
    ``c = leg_factor`` and each jump by ``1 + jump_mean``. The renewal equation over the
    Poisson jump times is solved by its Laplace transform: with ``q = p + lam`` and
    ``L = lam (1 + jump_mean)`` the transform is ``N(q) / (Q(q) - L N(q))`` where
    ``N(q) = sum(c_k k! b_bar**k q**(K - k))`` and ``Q(q) = q**(K + 1)``.
    """
    degree = len(leg_factor) - 1
    numerator = np.array([leg_factor[k] * math.factorial(k) * b_bar**k for k in range(degree + 1)])
    power = np.zeros(degree + 2)
    power[0] = 1.0
    denominator = power - np.concatenate(([0.0], lam * (1.0 + jump_mean) * numerator))
    derivative = np.polyder(denominator)
    total = 0.0 + 0.0j
    for q in np.roots(denominator):
        total += np.polyval(numerator, q) / np.polyval(derivative, q) * np.exp(q - lam)
    return x0 * float(total.real)


EULER_LEG = (1.0, 1.0)
TAYLOR2_LEG = (1.0, 1.0, 0.5)
