"""
kwak-demo {burgers, rda} - commuting diagram of the Kwak transform with the flow.
"""

import logging

from jordangap.commands.common import CommandContext, CommandReport
from jordangap.services import acceptance, kwak

logger = logging.getLogger("jordangap.commands.kwak_demo")

COMMAND = "kwak-demo"


def register(subparsers):
    parser = subparsers.add_parser(COMMAND, help="Kwak transform commuting-diagram errors")
    parser.add_argument("system", choices=["burgers", "rda"])
    parser.set_defaults(handler=run)
    return parser


def run(ctx: CommandContext, args=None) -> CommandReport:
    system = getattr(args, "system", "burgers") if args is not None else "burgers"
    kc = ctx.config.kwak
    with acceptance.timed(f"{COMMAND} {system}"):
        checks, results = acceptance.kwak_suite(ctx.config, ctx.rng, which=(system,), tol_scale=ctx.tol_scale)
    report = CommandReport(checks=checks)

    lifted = results.pop(f"{system}_trajectory", None)
    if lifted is not None:
        report.write_csv(ctx, lifted.to_frame(), f"kwak_{system}.csv")

    if system == "rda" and lifted is not None:
        with checks.guard("kwak.rda.chain_rule"):
            u0 = kwak.FourierField(lifted.states[0, 0].copy())
            scalar = kwak.rda_evolve(u0, kc.rda_f, (0.0, kc.T), kc.dt)
            results["chain_rule_residual"] = kwak.chain_rule_residual(scalar, kc.rda_f)
            results["iterated"] = kwak.iterated_chain_residual(scalar, kc.rda_f)

    results["system"] = system
    report.results = results
    if system in results:
        r = results[system]
        print(f"[*] {system}: diagram error {r['error']:.3e}, refined {r['refined_error']:.3e}, "
              f"ratio {r['refinement_ratio']:.2f}")
    return report
