"""
tracking-test - manifold trace of a forward solution and its decay rate.
"""

import logging

import numpy as np
import pandas as pd

from jordangap.commands.common import CommandContext, CommandReport
from jordangap.services import acceptance

logger = logging.getLogger("jordangap.commands.tracking_test")

COMMAND = "tracking-test"


def register(subparsers):
    parser = subparsers.add_parser(COMMAND, help="Exponential tracking of a forward solution by the manifold")
    parser.set_defaults(handler=run)
    return parser


def run(ctx: CommandContext, args=None) -> CommandReport:
    config = ctx.config
    with acceptance.timed(COMMAND):
        checks, results = acceptance.perron_suite(
            config, ctx.rng, config.nonlinearity.form, config.L, stages=("tracking",), tol_scale=ctx.tol_scale,
        )
    report = CommandReport(checks=checks)
    forward = results.pop("forward", None)
    trace = results.pop("trace", None)
    if forward is not None and trace is not None:
        report.write_csv(ctx, forward.to_frame(), "tracking_forward.csv")
        report.write_csv(ctx, trace.to_trajectory().to_frame(), "tracking_trace.csv")
        start = trace.index_of(0.0)
        diff = trace.states[start:start + len(forward)] - forward.states
        report.write_csv(ctx, pd.DataFrame({
            "t": forward.times,
            "distance": np.sqrt(np.sum(diff ** 2, axis=(-2, -1))),
        }), "tracking_distance.csv")
    tracking = results.get("tracking")
    if tracking is not None:
        print(f"[*] fitted rate {tracking.fitted_rate:.6g} vs theta {tracking.theta:.6g}, "
              f"constant {tracking.constant:.6g}")
    report.results = results
    return report
