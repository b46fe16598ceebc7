"""Approx command: build the optimal finite approximation of a Lévy measure."""

from __future__ import annotations

import json
import logging
import sys

from clicommands.commands.base import Command

from levysim.approx_optimizer import build_approx, error_bound_terms
from levysim.continuous_schemes import effective_drift
from levysim.exceptions import LevysimError
from levysim.helpers import build_measure, build_model, load_experiment, report_error, write_output

logger = logging.getLogger(__name__)


def _approx_command(args: list[str]) -> bool:  # noqa: C901
    """Build the order-n approximation at one intensity and emit it as JSON.

    Args:
        args: Command arguments.

    Returns:
        True if command executed successfully, False otherwise.
    """
    config_source: str | None = None
    out: str | None = None
    order: int | None = None
    lam: float | None = None
    match_third_moment = False
    bound_terms = False

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
                order = int(args[i + 1])
            except ValueError:
                print(f"Error: Invalid order value: {args[i + 1]}", file=sys.stderr)
                return False
            i += 2
        elif arg == "--lambda" and i + 1 < len(args):
            try:
                lam = float(args[i + 1])
            except ValueError:
                print(f"Error: Invalid lambda value: {args[i + 1]}", file=sys.stderr)
                return False
            i += 2
        elif arg == "--match-third-moment":
            match_third_moment = True
            i += 1
        elif arg == "--bound-terms":
            bound_terms = True
            i += 1
        else:
            print(f"Unknown argument: {arg}", file=sys.stderr)
            return False

    if order is None or lam is None:
        print("Error: --order and --lambda are required", file=sys.stderr)
        return False

    try:
        config = load_experiment(config_source)
        measure = build_measure(config.measure)
        options = {"match_third_moment": True} if match_third_moment and order == 3 else {}
        approx = build_approx(measure, order, lam, **options)
        gamma_bar = effective_drift(build_model(config, measure), approx).gamma_bar
        text = approx.to_json(gamma_bar)
        if bound_terms:
            terms = {str(k): v for k, v in error_bound_terms(measure, approx).items()}
            print(json.dumps(terms), file=sys.stderr)
        target = out or config.output.path_for(f"approx_order{order}_lambda{lam:g}.json")
        write_output(target, text)
    except LevysimError as exc:
        report_error(exc)
        return False

    logger.info("order %d at %.6g: eps=%.6g", order, lam, approx.epsilon)
    if target is not None:
        print(
            f"order {order}, lambda {lam:g}: epsilon={approx.epsilon:.6g} cutoff={approx.cutoff:.6g} "
            f"atoms={len(approx.atoms)} -> {target}"
        )
    return True


approx_command = Command(_approx_command, "Build the optimal approximation (use --config cfg --order n --lambda L)")
