"""
operator-norm - closed-form norms of the solution operator next to the
frequency-grid oracle and the discrete half-line estimate.
"""

import logging

import pandas as pd

from jordangap.commands.common import CommandContext, CommandReport
from jordangap.schemas.models import NormMode
from jordangap.services import linop, perron
from jordangap.services.dynamics import JordanSystem, NonlinearitySpec, standard_pattern

logger = logging.getLogger("jordangap.commands.operator_norm")

COMMAND = "operator-norm"


def register(subparsers):
    parser = subparsers.add_parser(COMMAND, help="Closed-form vs oracle operator norm at the gap n")
    parser.add_argument("--half-line", action="store_true",
                        help="Also estimate the discrete half-line norm by power iteration")
    parser.set_defaults(handler=run)
    return parser


def run(ctx: CommandContext, args=None) -> CommandReport:
    config = ctx.config
    ladder = ctx.ladder()
    a, b = ladder.pair(config.n)
    checks = ctx.checklist()
    report = CommandReport(checks=checks)
    grid = linop.OmegaGrid.for_ladder(ladder, config.omega.factor, config.omega.points)

    results = {}
    for mode, tol in ((NormMode.FULL, 1e-6), (NormMode.TRUNCATED, 1e-9)):
        closed = linop.closed_form_norm(a, b, mode, config.n)
        oracle = linop.oracle_norm(ladder, closed.theta, grid, mode, workers=ctx.workers)
        minimax = linop.minimax_theta(a, b, mode)
        rel = abs(closed.norm - oracle.norm) / closed.norm
        checks.below(f"operator_norm.{mode.value}.oracle", rel, tol)
        checks.flag(f"operator_norm.{mode.value}.attaining_mode", oracle.attaining_mode in (config.n, config.n + 1),
                    detail=f"sup attained at k={oracle.attaining_mode}")
        results[mode.value] = {
            "closed_form": closed.to_report(),
            "oracle": oracle.to_report(),
            "relative_error": rel,
            "minimax_theta": minimax,
        }
        print(f"[*] {mode.value}: closed form {closed.norm:.9g} | oracle {oracle.norm:.9g} | theta* {closed.theta.theta:.9g}")

    full_theta = results["full"]["closed_form"]["theta"]
    tr_theta = results["truncated"]["closed_form"]["theta"]
    report.write_csv(ctx, pd.DataFrame({
        "k": range(1, ladder.N + 1),
        "lambda": ladder.array(),
        "full": linop.per_mode_norms(ladder, full_theta, NormMode.FULL),
        "truncated": linop.per_mode_norms(ladder, tr_theta, NormMode.TRUNCATED),
    }), "per_mode_norms.csv")

    if args is not None and getattr(args, "half_line", False):
        system = JordanSystem(ladder=ladder, nonlinearity=NonlinearitySpec.zero(), pattern=standard_pattern(2))
        half = perron.discrete_norm_L(system, config.n, full_theta, rng=ctx.rng)
        results["half_line_norm"] = half
        print(f"[*] discrete half-line norm {half:.9g}")

    report.results = results
    return report
