"""Simulate command: Monte Carlo estimate of E[f(X_1)] for one approximation and scheme."""

from __future__ import annotations

import logging
import sys

from clicommands.commands.base import Command

from levysim.approx_optimizer import build_approx
from levysim.continuous_schemes import SchemeKind
from levysim.exceptions import LevysimError
from levysim.helpers import (
    apply_overrides,
    build_measure,
    build_model,
    load_experiment,
    report_error,
    resolve_reference,
    stepper_config,
    write_output,
)
from levysim.jump_adapted import simulate_path
from levysim.mc_engine import estimate, stream_for

logger = logging.getLogger(__name__)


def _trace_csv(points: list[tuple[float, float]]) -> str:
    return "t,x\n" + "".join(f"{t!r},{x!r}\n" for t, x in points)


def _simulate_command(args: list[str]) -> bool:  # noqa: C901
    """Estimate E[f(X_1)], or write the trace of one path with --trace.

    Args:
        args: Command arguments.

    Returns:
        True if command executed successfully, False otherwise.
    """
    config_source: str | None = None
    out: str | None = None
    order: int | None = None
    lam: float | None = None
    scheme: str | None = None
    trace = False
    overrides: dict[str, int | None] = {"paths": None, "seed": None, "workers": None, "substeps": None}

    i = 0
    while i < len(args):
        arg = args[i]
        if arg == "--config" and i + 1 < len(args):
            config_source = args[i + 1]
            i += 2
        elif arg == "--out" and i + 1 < len(args):
            out = args[i + 1]
            i += 2
        elif arg == "--scheme" and i + 1 < len(args):
            scheme = args[i + 1]
            i += 2
        elif arg == "--lambda" and i + 1 < len(args):
            try:
                lam = float(args[i + 1])
            except ValueError:
                print(f"Error: Invalid lambda value: {args[i + 1]}", file=sys.stderr)
                return False
            i += 2
        elif arg in ("--order", "--paths", "--seed", "--workers", "--substeps") and i + 1 < len(args):
            try:
                value = int(args[i + 1])
            except ValueError:
                print(f"Error: Invalid {arg[2:]} value: {args[i + 1]}", file=sys.stderr)
                return False
            if arg == "--order":
                order = value
            else:
                overrides[arg[2:]] = value
            i += 2
        elif arg == "--trace":
            trace = True
            i += 1
        else:
            print(f"Unknown argument: {arg}", file=sys.stderr)
            return False

    if lam is None:
        print("Error: --lambda is required", file=sys.stderr)
        return False

    try:
        config = apply_overrides(load_experiment(config_source), **overrides)
        run = config.run
        order = order if order is not None else run.orders[0]
        scheme = SchemeKind.parse(scheme or run.schemes[0]).value
        measure = build_measure(config.measure)
        model = build_model(config, measure)
        approx = build_approx(measure, order, lam)
        if trace:
            outcome = simulate_path(
                model, approx, scheme, stepper_config(config), stream_for(run.seed, 0), trace=True
            )
            target = out or config.output.path_for(f"trace_order{order}_{scheme}_seed{run.seed}.csv")
            write_output(target, _trace_csv(outcome.trace or []))
            summary = f"one path, {outcome.n_jumps} jumps, X_1={outcome.x_final:.6g}"
        else:
            result = estimate(
                model,
                approx,
                scheme,
                run.payoff,
                run.paths,
                run.seed,
                stepper_config(config),
                run.workers,
                resolve_reference(config, measure),
            )
            target = out or config.output.path_for(f"simulate_order{order}_{scheme}_lambda{lam:g}.json")
            write_output(target, result.to_json())
            summary = f"{result.estimate:.6g} +- {result.std_error:.3g} over {result.paths} paths"
    except LevysimError as exc:
        report_error(exc)
        return False

    logger.info("simulate order %d %s at %.6g: %s", order, scheme, lam, summary)
    print(f"order {order}, {scheme}, lambda {lam:g}: {summary}", file=sys.stderr if target is None else sys.stdout)
    return True


simulate_command = Command(
    _simulate_command, "Monte Carlo estimate (use --config cfg --order n --lambda L --scheme s)"
)
