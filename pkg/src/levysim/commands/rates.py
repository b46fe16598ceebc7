"""Rates command: error functional against intensity and its log-log slope."""

from __future__ import annotations

import logging
import sys
from pathlib import Path

from clicommands.commands.base import Command

from levysim.approx_optimizer import rate_curve
from levysim.exceptions import LevysimError
from levysim.helpers import build_measure, load_experiment, parse_lambda_grid, report_error, write_output

logger = logging.getLogger(__name__)

DEFAULT_RATES_GRID = "16:4096:9"


def _rates_command(args: list[str]) -> bool:  # noqa: C901
    """Tabulate ``lambda, epsilon, J`` for one order over a grid of intensities.

    Args:
        args: Command arguments.

    Returns:
        True if command executed successfully, False otherwise.
    """
    config_source: str | None = None
    out: str | None = None
    orders: list[int] = []
    grid_spec = DEFAULT_RATES_GRID

    i = 0
    while i < len(args):
        arg = args[i]
        if arg == "--config" and i + 1 < len(args):
            config_source = args[i + 1]
            i += 2
        elif arg == "--out" and i + 1 < len(args):
            out = args[i + 1]
            i += 2
        elif arg == "--order" and i + 1 < len(args):
            try:
                orders.append(int(args[i + 1]))
            except ValueError:
                print(f"Error: Invalid order value: {args[i + 1]}", file=sys.stderr)
                return False
            i += 2
        elif arg == "--lambda-grid" and i + 1 < len(args):
            grid_spec = args[i + 1]
            i += 2
        else:
            print(f"Unknown argument: {arg}", file=sys.stderr)
            return False

    try:
        config = load_experiment(config_source)
        grid = parse_lambda_grid(grid_spec)
        measure = build_measure(config.measure)
        alpha = getattr(getattr(measure, "params", None), "alpha", None)
        order_list = orders or list(config.run.orders)
        for order in order_list:
            curve = rate_curve(measure, order, grid)
            target: Path | None
            if out is None:
                target = config.output.path_for(f"rates_order{order}.csv")
            elif len(order_list) == 1:
                target = Path(out)
            else:
                target = Path(out).with_name(f"{Path(out).stem}_order{order}{Path(out).suffix}")
            write_output(target, curve.to_csv())
            expected = f" (regular variation predicts {1 - order / alpha:.4f})" if alpha else ""
            print(f"order {order}: slope {curve.slope:.4f}{expected}", file=sys.stderr if target is None else sys.stdout)
            logger.info("order %d rate slope %.4f over %d points", order, curve.slope, len(grid))
    except LevysimError as exc:
        report_error(exc)
        return False
    return True


rates_command = Command(_rates_command, "Error functional against intensity (use --config cfg --order n)")
