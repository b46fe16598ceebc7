from __future__ import annotations

import math

import numpy as np
import pytest
from conftest import ScriptedStream
from scipy import stats

from levysim.approx_optimizer import FiniteApprox, build_oa2, build_oa3
from levysim.continuous_schemes import SchemeKind, SdeCoefficients, StepperConfig
from levysim.exceptions import FlowError
from levysim.jump_adapted import (
    JumpSizeSampler,
    LevyModel,
    PathSimulator,
    expected_jump_count,
    martingale_drift,
    simulate_path,
)
from levysim.levy_measure import Region, partial_moment
from levysim.mc_engine import stream_for


def additive_model(measure, drift: float = 0.0, volatility: float = 0.0) -> LevyModel:
    return LevyModel(SdeCoefficients.constant(drift, volatility), measure, mu_Z=0.0)


def test_martingale_drift(dataset1):
    expected = -partial_moment(dataset1, 1, Region.outside(1.0))
    assert martingale_drift(dataset1) == pytest.approx(expected)
    assert LevyModel(SdeCoefficients.stochastic_exponential(0.5, 0.3), dataset1).mu_Z == pytest.approx(expected)


def test_drift_resolves_mu_z(dataset1):
    coeffs = SdeCoefficients.stochastic_exponential(0.5, 0.3)
    assert LevyModel(coeffs, dataset1).drift == pytest.approx(martingale_drift(dataset1))
    assert LevyModel(coeffs, dataset1, mu_Z=0.25).drift == 0.25
    assert LevyModel(coeffs, dataset1, mu_Z=0.0).drift == 0.0


def test_scripted_path(uniform_measure):
    approx = build_oa2(uniform_measure, 1.0)
    stream = ScriptedStream(
        uniforms=[1 - math.exp(-0.5), 0.3, 0.75, 1 - math.exp(-1.0)],
        normals=[0.4, -1.2],
    )
    outcome = simulate_path(additive_model(uniform_measure), approx, "wt1", StepperConfig(), stream, trace=True)
    # waiting time 0.5, jump of +0.75, no further jump before the horizon
    assert outcome.n_jumps == 1
    assert outcome.x_final == pytest.approx(1.75, rel=1e-9)
    assert stream.exhausted
    assert [t for t, _ in outcome.trace] == pytest.approx([0.0, 0.5, 1.0])


def test_no_jumps_single_leg(uniform_measure):
    model = additive_model(uniform_measure, drift=0.3)
    stream = ScriptedStream(normals=[2.0])
    outcome = simulate_path(model, FiniteApprox.empty(uniform_measure), "wt1", StepperConfig(), stream)
    assert outcome.n_jumps == 0
    assert outcome.x_final == pytest.approx(1.3)
    assert stream.exhausted


def test_zero_jump_coefficient_ignores_jumps(dataset1):
    model = LevyModel(SdeCoefficients.linear(0.4, 0.0, 0.0), dataset1, x0=2.0)
    approx = build_oa2(dataset1, 6.0)
    simulator = PathSimulator(model, approx, SchemeKind.NV)
    outcomes = [simulator.run(stream_for(3, i)) for i in range(50)]
    assert sum(o.n_jumps for o in outcomes) > 0
    for outcome in outcomes:
        assert outcome.x_final == pytest.approx(2.0 * math.exp(0.4), rel=1e-12)


def test_paths_are_reproducible(dataset1):
    model = LevyModel(SdeCoefficients.stochastic_exponential(0.5, 0.3), dataset1)
    approx = build_oa3(dataset1, 4.0)
    first = simulate_path(model, approx, "wt2", StepperConfig(), stream_for(9, 17), trace=True)
    second = simulate_path(model, approx, "wt2", StepperConfig(), stream_for(9, 17), trace=True)
    assert first == second
    other = simulate_path(model, approx, "wt2", StepperConfig(), stream_for(9, 18))
    assert other.x_final != first.x_final


def test_trace_is_ordered(dataset1):
    model = LevyModel(SdeCoefficients.stochastic_exponential(0.5, 0.3), dataset1)
    approx = build_oa2(dataset1, 16.0)
    outcome = simulate_path(model, approx, "nv", StepperConfig(substeps=2), stream_for(1, 0), trace=True)
    times = [t for t, _ in outcome.trace]
    assert times[0] == 0.0 and times[-1] == 1.0
    assert all(b > a for a, b in zip(times, times[1:]))
    assert len(times) == outcome.n_jumps + 2
    assert outcome.trace[-1][1] == outcome.x_final


def test_jump_count_is_poisson(uniform_measure):
    approx = build_oa2(uniform_measure, 1.5)
    simulator = PathSimulator(additive_model(uniform_measure), approx, SchemeKind.WT1)
    counts = np.array([simulator.run(stream_for(5, i)).n_jumps for i in range(4000)])
    lam = expected_jump_count(approx)
    assert abs(counts.mean() - lam) < 3 * math.sqrt(lam / counts.size)
    assert counts.var(ddof=1) == pytest.approx(lam, rel=0.15)


@pytest.mark.statistical
def test_jump_count_passes_chi_square(dataset2):
    approx = build_oa2(dataset2, 3.0)
    simulator = PathSimulator(additive_model(dataset2), approx, SchemeKind.WT1)
    counts = np.array([simulator.run(stream_for(11, i)).n_jumps for i in range(5000)])
    lam = expected_jump_count(approx)
    # last bin pools the tail so every expected count stays above 5
    top = int(stats.poisson.ppf(0.999, lam))
    observed = np.bincount(np.minimum(counts, top), minlength=top + 1)
    probabilities = stats.poisson.pmf(np.arange(top), lam)
    expected = counts.size * np.append(probabilities, 1.0 - probabilities.sum())
    assert expected.min() > 5.0
    assert stats.chisquare(observed, expected).pvalue > 0.01


def test_jump_sizes_follow_atoms_and_tail(dataset1):
    approx = build_oa3(dataset1, 4.0)
    sampler = JumpSizeSampler(approx)
    rng = np.random.default_rng(8)
    draws = np.array([sampler.draw(rng) for _ in range(20_000)])
    on_atoms = np.isin(draws, [a.location for a in approx.atoms])
    assert on_atoms.mean() == pytest.approx(approx.atom_mass / approx.lambda_total, abs=0.02)
    assert np.all(np.abs(draws[~on_atoms]) > approx.cutoff)


def test_flow_failure_reports_leg_start(uniform_measure):
    coeffs = SdeCoefficients.from_functions(lambda x: 1e3 * x * x, lambda x: 0.0, lambda x: 1.0)
    model = LevyModel(coeffs, uniform_measure, mu_Z=0.0)
    with pytest.raises(FlowError) as info:
        simulate_path(model, FiniteApprox.empty(uniform_measure), "nv", StepperConfig(), ScriptedStream(normals=[0.0]))
    assert info.value.time == 0.0
