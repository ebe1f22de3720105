"""
gap-check - evaluate every configured gap condition on the ladder.
"""

import logging

import pandas as pd

from jordangap.commands.common import CommandContext, CommandReport
from jordangap.services import gapcheck, sharpness

logger = logging.getLogger("jordangap.commands.gap_check")

COMMAND = "gap-check"


def register(subparsers):
    parser = subparsers.add_parser(COMMAND, help="Spectral gap reports and admissible gap indices")
    parser.set_defaults(handler=run)
    return parser


def run(ctx: CommandContext, args=None) -> CommandReport:
    config = ctx.config
    ladder = ctx.ladder()
    checks = ctx.checklist()
    report = CommandReport(checks=checks)

    kinds = list(config.kinds)
    if config.condition not in kinds:
        kinds.append(config.condition)
    rows = gapcheck.gap_reports(ladder, config.L, kinds)
    admissible = {kind.label: gapcheck.find_admissible_n(ladder, config.L, kind) for kind in kinds}

    selected = gapcheck.gap_report(ladder, config.n, config.L, config.condition)
    checks.flag(f"gap_check.{config.condition.label}.n={config.n}", selected.satisfied, value=selected.lhs,
                detail=f"lhs {selected.lhs:.6g} <= L {config.L:g}")

    certificate = sharpness.gap_violation_certificate(ladder, config.L, config.condition)
    report.results = {
        "reports": rows,
        "admissible": admissible,
        "selected": selected,
        "certificate": certificate,
    }
    report.write_csv(ctx, pd.DataFrame([
        {"kind": r.kind.label, "n": r.n, "lambda_n": r.lambda_n, "lambda_np1": r.lambda_np1,
         "lhs": r.lhs, "L": r.L, "satisfied": r.satisfied, "theta_star": r.theta_star}
        for r in rows
    ]), "gap_reports.csv")
    print(f"[*] {sum(r.satisfied for r in rows)}/{len(rows)} conditions satisfied at L={config.L:g}")
    return report
