"""
build-manifold - Perron construction of the manifold graph on sampled base points.
"""

import logging

from jordangap.commands.common import CommandContext, CommandReport
from jordangap.services import acceptance

logger = logging.getLogger("jordangap.commands.build_manifold")

COMMAND = "build-manifold"


def register(subparsers):
    parser = subparsers.add_parser(COMMAND, help="Sample the manifold graph, estimate its Lipschitz constant")
    parser.add_argument("--skip-invariance", action="store_true", help="Do not run the forward invariance check")
    parser.set_defaults(handler=run)
    return parser


def run(ctx: CommandContext, args=None) -> CommandReport:
    config = ctx.config
    stages = ("contraction", "manifold")
    if not (args is not None and getattr(args, "skip_invariance", False)):
        stages += ("invariance",)

    with acceptance.timed(COMMAND):
        checks, results = acceptance.perron_suite(
            config, ctx.rng, config.nonlinearity.form, config.L, stages=stages, tol_scale=ctx.tol_scale,
        )
    report = CommandReport(checks=checks)
    samples = results.pop("samples", None)
    if samples is not None:
        report.write_csv(ctx, samples, "manifold_samples.csv")
    report.results = results
    if "lipschitz_ratio" in results:
        print(f"[*] Lipschitz ratio {results['lipschitz_ratio']:.6g} over {results['lipschitz_pairs']} pairs "
              f"(bound {results['lipschitz_bound']:.6g})")
    return report
