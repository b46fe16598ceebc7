"""Sweep command: bias and cost of every (order, scheme, lambda) cell."""

from __future__ import annotations

import logging
import sys
from typing import Any

from clicommands.commands.base import Command

from levysim.exceptions import LevysimError
from levysim.helpers import (
    apply_overrides,
    build_measure,
    build_model,
    load_experiment,
    parse_lambda_grid,
    report_error,
    resolve_reference,
    stepper_config,
    write_output,
)
from levysim.mc_engine import bias_slope, convergence_sweep, sweep_to_csv

logger = logging.getLogger(__name__)


def _sweep_command(args: list[str]) -> bool:  # noqa: C901
    """Run a convergence sweep and write one CSV row per cell.

    Args:
        args: Command arguments.

    Returns:
        True if command executed successfully, False otherwise.
    """
    config_source: str | None = None
    out: str | None = None
    orders: list[int] = []
    schemes: list[str] = []
    grid_spec: str | None = None
    overrides: dict[str, Any] = {"paths": None, "seed": None, "workers": None, "substeps": None}

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
            schemes.append(args[i + 1])
            i += 2
        elif arg == "--lambda-grid" and i + 1 < len(args):
            grid_spec = args[i + 1]
            i += 2
        elif arg in ("--order", "--paths", "--seed", "--workers", "--substeps") and i + 1 < len(args):
            try:
                value = int(args[i + 1])
            except ValueError:
                print(f"Error: Invalid {arg[2:]} value: {args[i + 1]}", file=sys.stderr)
                return False
            if arg == "--order":
                orders.append(value)
            else:
                overrides[arg[2:]] = value
            i += 2
        else:
            print(f"Unknown argument: {arg}", file=sys.stderr)
            return False

    try:
        if orders:
            overrides["orders"] = tuple(orders)
        if schemes:
            overrides["schemes"] = tuple(schemes)
        if grid_spec is not None:
            overrides["lambda_grid"] = parse_lambda_grid(grid_spec)
        config = apply_overrides(load_experiment(config_source), **overrides)
        run = config.run
        measure = build_measure(config.measure)
        reference = resolve_reference(config, measure)
        records = convergence_sweep(
            build_model(config, measure),
            run.orders,
            run.schemes,
            run.lambda_grid,
            run.paths,
            run.seed,
            reference,
            f=run.payoff,
            config=stepper_config(config),
            workers=run.workers,
        )
        target = out or config.output.path_for("sweep.csv")
        write_output(target, sweep_to_csv(records))
        summary = sys.stderr if target is None else sys.stdout
        print(f"{len(records)} cells, reference {reference}", file=summary)
        if reference is not None and len(run.lambda_grid) > 1:
            for order in run.orders:
                for kind in run.schemes:
                    slope = bias_slope(records, order, kind)
                    print(f"order {order}, {kind.value}: |bias| slope {slope:.4f}", file=summary)
    except LevysimError as exc:
        report_error(exc)
        return False

    logger.info("sweep over %d cells done", len(records))
    return True


sweep_command = Command(_sweep_command, "Convergence sweep over orders, schemes and intensities (use --config cfg)")
