"""
verify-all - the full acceptance suite, one section per property.
"""

import logging
from typing import Any, Dict

from jordangap.commands.common import CommandContext, CommandReport, print_checks
from jordangap.schemas.config import ExperimentConfig
from jordangap.schemas.models import NonlinearityForm, PowerLadder
from jordangap.services import acceptance

logger = logging.getLogger("jordangap.commands.verify_all")

COMMAND = "verify-all"

SECTIONS = ("operator_norm", "monotonicity", "gap_bounds", "perron", "perron_lt",
            "sharpness", "kwak", "propagator", "hl_norm")


def register(subparsers):
    parser = subparsers.add_parser(COMMAND, help="Run every acceptance property")
    parser.add_argument("--only", nargs="+", choices=SECTIONS, help="Run a subset of the sections")
    parser.set_defaults(handler=run)
    return parser


def perron_config(config: ExperimentConfig) -> ExperimentConfig:
    """The fixed Perron test system: ladder k^2, N = 16, n = 3, m = 2, saturating."""
    return config.model_copy(update={
        "ladder": PowerLadder(c=1.0, p=2.0), "N": 16, "n": 3, "theta": None,
        "nonlinearity": config.nonlinearity.model_copy(update={"kind": "saturating", "m": 2}),
    })


def run(ctx: CommandContext, args=None) -> CommandReport:
    config = ctx.config
    acc = config.acceptance
    sections = set(getattr(args, "only", None) or SECTIONS) if args is not None else set(SECTIONS)
    checks = ctx.checklist()
    report = CommandReport(checks=checks)
    results: Dict[str, Any] = {}
    rng = ctx.rng
    scale = ctx.tol_scale

    def section(name: str, part: acceptance.CheckList):
        print_checks(part, name)
        checks.extend(part)

    if "operator_norm" in sections:
        with acceptance.timed("operator_norm"):
            section("operator_norm", acceptance.operator_norm_sweep(
                rng, acc.ladders, config.omega.points, config.omega.factor, scale))
    if "monotonicity" in sections:
        with acceptance.timed("monotonicity"):
            section("monotonicity", acceptance.monotonicity_suite(acc.grid))
    if "gap_bounds" in sections:
        section("gap_bounds", acceptance.denominator_bounds(rng, acc.pairs, scale))

    fixed = perron_config(config)
    if "perron" in sections:
        with acceptance.timed("perron"):
            part, res = acceptance.perron_suite(fixed, rng, NonlinearityForm.GENERAL, 0.5, tol_scale=scale)
        section("perron", part)
        results["perron"] = _summary(res)
    if "perron_lt" in sections:
        with acceptance.timed("perron_lt"):
            part, res = acceptance.perron_suite(fixed, rng, NonlinearityForm.LOWER_TRIANGULAR, 0.9,
                                                theta=12.0, tol_scale=scale)
        section("perron_lt", part)
        results["perron_lt"] = _summary(res)

    if "sharpness" in sections:
        part, res = acceptance.sharpness_suite(tol_scale=scale)
        section("sharpness", part)
        results["sharpness"] = res
    if "kwak" in sections:
        with acceptance.timed("kwak"):
            part, res = acceptance.kwak_suite(config, rng, tol_scale=scale)
        section("kwak", part)
        results["kwak"] = {k: v for k, v in res.items() if not k.endswith("_trajectory")}
    if "propagator" in sections:
        section("propagator", acceptance.propagator_exactness(rng, acc.propagators, scale))
    if "hl_norm" in sections:
        section("hl_norm", acceptance.hl_norm_suite(rng, acc.lipschitz_pairs, tol_scale=scale))

    report.results = results
    return report


def _summary(res: Dict[str, Any]) -> Dict[str, Any]:
    return {k: v for k, v in res.items() if k not in ("samples", "trace", "forward")}
