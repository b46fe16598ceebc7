"""Monte Carlo estimation of ``E[f(X_1)]`` over jump-adapted paths.

Every path owns a counter-based Philox stream keyed by ``(seed, path_index)``, so
a path's draws never depend on which worker runs it or in which order. Payoffs
are gathered into one array in path order before any reduction, which keeps the
estimate bit-identical for every worker count.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import multiprocessing
import os
import time
from collections.abc import Callable, Iterable, Sequence
from dataclasses import asdict, dataclass
from typing import Any, Protocol

import numpy as np

from levysim.approx_optimizer import FiniteApprox, build_approx, loglog_slope
from levysim.continuous_schemes import SchemeKind, StepperConfig
from levysim.exceptions import ConfigError, TaintedEstimateError
from levysim.jump_adapted import LevyModel, PathSimulator
from levysim.levy_measure import LevyMeasureSpec, MomentMode, Region, partial_moment

logger = logging.getLogger(__name__)

Payoff = Callable[[float], float]

TARGET_STD_ERROR = 1e-3
CHUNKS_PER_WORKER = 4
SWEEP_CSV_COLUMNS = (
    "lambda",
    "order",
    "scheme",
    "estimate",
    "std_error",
    "bias",
    "wallclock_s",
    "normalized_s",
)
_KEY_MASK = (1 << 64) - 1


class RandomStream(Protocol):
    """The two draws the simulator consumes."""

    def random(self) -> float: ...

    def standard_normal(self) -> float: ...


def stream_for(seed: int, path_index: int) -> np.random.Generator:
    """Philox generator whose key packs ``seed`` (high word) and ``path_index`` (low word)."""
    if seed < 0 or path_index < 0:
        raise ConfigError(
            f"seed and path index must be nonnegative, got {seed} and {path_index}",
            fields=[name for name, value in (("seed", seed), ("path_index", path_index)) if value < 0],
            module="mc_engine",
        )
    key = ((int(seed) & _KEY_MASK) << 64) | (int(path_index) & _KEY_MASK)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class MCResult:
    estimate: float
    std_error: float
    paths: int
    seed: int
    wallclock_seconds: float
    bias: float | None = None

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


@dataclass(frozen=True)
class SweepRecord:
    lam: float
    order: int
    scheme: str
    estimate: float
    std_error: float
    bias: float | None
    wallclock_seconds: float
    seconds_normalized: float

    def to_row(self) -> list[Any]:
        return [
            self.lam,
            self.order,
            self.scheme,
            self.estimate,
            self.std_error,
            "" if self.bias is None else self.bias,
            self.wallclock_seconds,
            self.seconds_normalized,
        ]


def normalized_seconds(wallclock: float, std_error: float, target: float = TARGET_STD_ERROR) -> float:
    """Wall-clock time rescaled to the cost of reaching ``target`` standard error."""
    return wallclock * (std_error / target) ** 2


def _chunks(paths: int, workers: int) -> list[range]:
    count = max(1, min(paths, workers * CHUNKS_PER_WORKER))
    bounds = np.linspace(0, paths, count + 1).astype(int)
    return [range(lo, hi) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]


def _run_chunk(simulator: PathSimulator, f: Payoff, seed: int, indices: range) -> np.ndarray:
    values = np.empty(len(indices))
    for slot, index in enumerate(indices):
        outcome = simulator.run(stream_for(seed, index))
        values[slot] = f(outcome.x_final)
    return values


_worker_job: tuple[PathSimulator, Payoff] | None = None


def _install_job(simulator: PathSimulator, f: Payoff) -> None:
    global _worker_job
    _worker_job = (simulator, f)


def _run_job_chunk(task: tuple[int, int, int]) -> np.ndarray:
    seed, start, stop = task
    assert _worker_job is not None
    simulator, f = _worker_job
    return _run_chunk(simulator, f, seed, range(start, stop))


def _pool_context() -> multiprocessing.context.BaseContext:
    """The fork context when the platform offers it, the default context otherwise."""
    if "fork" in multiprocessing.get_all_start_methods():
        return multiprocessing.get_context("fork")
    return multiprocessing.get_context()


def simulate_payoffs(
    simulator: PathSimulator,
    f: Payoff,
    paths: int,
    seed: int,
    workers: int | None = None,
) -> np.ndarray:
    """Payoff of every path, in path-index order.

    With several workers the chunks run in a process pool; each chunk only carries its
    index range, and results are concatenated in chunk order.
    """
    workers = workers or os.cpu_count() or 1
    chunks = _chunks(paths, workers)
    if workers == 1 or len(chunks) == 1:
        parts = [_run_chunk(simulator, f, seed, chunk) for chunk in chunks]
    else:
        tasks = [(seed, chunk.start, chunk.stop) for chunk in chunks]
        processes = min(workers, len(chunks))
        logger.debug("%d paths in %d chunks over %d processes", paths, len(chunks), processes)
        with _pool_context().Pool(
            processes=processes, initializer=_install_job, initargs=(simulator, f)
        ) as pool:
            parts = pool.map(_run_job_chunk, tasks)
    return np.concatenate(parts)


def estimate(
    model: LevyModel,
    approx: FiniteApprox,
    scheme: SchemeKind | str,
    f: Payoff,
    M: int,
    seed: int,
    config: StepperConfig | None = None,
    workers: int | None = None,
    reference: float | None = None,
) -> MCResult:
    """Mean of ``f(X_1)`` over ``M`` paths with its standard error.

    Raises:
        ConfigError: If fewer than two paths are requested.
        TaintedEstimateError: If the payoff is not finite on some path.
    """
    if M < 2:
        raise ConfigError(f"at least 2 paths are needed, got {M}", fields=["paths"], module="mc_engine")
    started = time.perf_counter()
    simulator = PathSimulator(model, approx, SchemeKind.parse(scheme), config or StepperConfig())
    payoffs = simulate_payoffs(simulator, f, M, seed, workers)
    bad = np.flatnonzero(~np.isfinite(payoffs))
    if bad.size:
        index = int(bad[0])
        raise TaintedEstimateError(
            f"payoff is {payoffs[index]} on path {index}", path_index=index, seed=seed
        )
    mean = float(payoffs.mean())
    std_error = float(payoffs.std(ddof=1) / math.sqrt(M))
    wallclock = time.perf_counter() - started
    logger.debug(
        "%s order %d at %.6g: %.6g +- %.3g over %d paths in %.2fs",
        simulator.scheme.value,
        approx.order,
        approx.lambda_total,
        mean,
        std_error,
        M,
        wallclock,
    )
    return MCResult(
        estimate=mean,
        std_error=std_error,
        paths=M,
        seed=seed,
        wallclock_seconds=wallclock,
        bias=None if reference is None else mean - reference,
    )


def cell_seed(seed: int, cell: int) -> int:
    """Independent seed for one sweep cell, derived from the run seed."""
    return int(np.random.SeedSequence([seed, cell]).generate_state(1, np.uint64)[0])


def square(x: float) -> float:
    return x * x


def convergence_sweep(
    model: LevyModel,
    orders: Sequence[int],
    schemes: Sequence[SchemeKind | str],
    lambda_grid: Sequence[float],
    M: int,
    seed: int,
    reference: float | None,
    f: Payoff = square,
    config: StepperConfig | None = None,
    workers: int | None = None,
) -> list[SweepRecord]:
    """One record per ``(order, scheme, lambda)``, each cell with its own derived seed."""
    kinds = [SchemeKind.parse(scheme) for scheme in schemes]
    records: list[SweepRecord] = []
    cell = 0
    for order in orders:
        for lam in lambda_grid:
            approx = build_approx(model.measure, order, lam)
            for kind in kinds:
                result = estimate(
                    model, approx, kind, f, M, cell_seed(seed, cell), config, workers, reference
                )
                records.append(
                    SweepRecord(
                        lam=float(lam),
                        order=order,
                        scheme=kind.value,
                        estimate=result.estimate,
                        std_error=result.std_error,
                        bias=result.bias,
                        wallclock_seconds=result.wallclock_seconds,
                        seconds_normalized=normalized_seconds(result.wallclock_seconds, result.std_error),
                    )
                )
                logger.debug("sweep cell %d done: order %d, %s, lambda %.6g", cell, order, kind.value, lam)
                cell += 1
    return records


def sweep_to_csv(records: Iterable[SweepRecord]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(SWEEP_CSV_COLUMNS)
    for record in records:
        writer.writerow(record.to_row())
    return buffer.getvalue()


def bias_slope(records: Iterable[SweepRecord], order: int, scheme: SchemeKind | str) -> float:
    """Least-squares slope of ``log |bias|`` against ``log lambda`` for one curve."""
    kind = SchemeKind.parse(scheme).value
    cells = [r for r in records if r.order == order and r.scheme == kind and r.bias is not None]
    if len(cells) < 2:
        raise ConfigError(
            f"need two records with a bias for order {order} and {kind}, got {len(cells)}",
            fields=["reference"],
            module="mc_engine",
        )
    return loglog_slope([r.lam for r in cells], [abs(r.bias) for r in cells])  # type: ignore[arg-type]


def stochastic_exponential_mean(gamma0: float, T: float = 1.0) -> float:
    """``E[X_T] = exp(gamma0 T)`` for ``dX = X (gamma0 dt + sigma0 dB + dZ)``, ``Z`` a martingale."""
    return math.exp(gamma0 * T)


def stochastic_exponential_second_moment(
    gamma0: float, sigma0: float, measure: LevyMeasureSpec, T: float = 1.0
) -> float:
    """``E[X_T**2] = exp(2 gamma0 T + sigma0**2 T + T int y**2 nu(dy))``."""
    second = partial_moment(measure, 2, Region.whole(), MomentMode.SIGNED)
    return math.exp((2.0 * gamma0 + sigma0**2 + second) * T)
