"""
counterexample - linear nonlinearity that rotates the two gap eigenvalues into
a complex pair, with the spiral trajectory as CSV.
"""

import logging
import math

from jordangap.commands.common import CommandContext, CommandReport
from jordangap.schemas.models import NormMode
from jordangap.services import sharpness

logger = logging.getLogger("jordangap.commands.counterexample")

COMMAND = "counterexample"


def register(subparsers):
    parser = subparsers.add_parser(COMMAND, help="Sharpness counterexample and oscillation demo")
    parser.set_defaults(handler=run)
    return parser


def run(ctx: CommandContext, args=None) -> CommandReport:
    config = ctx.config
    cc = config.counterexample
    ladder = ctx.ladder()
    checks = ctx.checklist()
    report = CommandReport(checks=checks)

    a, b = ladder.pair(config.n)
    a = cc.lambda_n if cc.lambda_n is not None else a
    b = cc.lambda_np1 if cc.lambda_np1 is not None else b

    with checks.guard("counterexample.build"):
        inst = sharpness.build_counterexample(a, b, cc.epsilon, cc.mode, n=config.n)
        summary = inst.to_report()
        report.results.update(summary)
        checks.flag("counterexample.complex_pair", inst.complex_pair() is not None, value=summary["omega"])

        if cc.mode == NormMode.TRUNCATED:
            checks.below("counterexample.char_poly", sharpness.characteristic_polynomial_check(inst), 1e-10)

        with checks.guard("counterexample.oscillation"):
            osc = sharpness.oscillation_demo(inst, cc.periods)
            report.results.update(zero_count=osc.zero_count, verdict=osc.verdict, oscillation=osc)
            checks.at_least("counterexample.zero_count", osc.zero_count, math.floor(2.0 * cc.periods))
            checks.flag("counterexample.verdict", osc.verdict)
            report.write_csv(ctx, sharpness.spiral_frame(inst, cc.periods), "spiral.csv")
        print(f"[*] K={inst.K:.9g} epsilon={inst.epsilon:.3g} ||F||={inst.nonlinearity_norm:.6g} "
              f"omega={summary['omega']:.6g}")

    report.results["certificate"] = sharpness.gap_violation_certificate(ladder, config.L, config.condition)
    return report
