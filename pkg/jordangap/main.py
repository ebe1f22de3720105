"""
Command-line entry point: parse flags, load the experiment config, dispatch
to a subcommand and write its report.

Exit codes: 0 when every check passes, 1 on a numerical failure or a failed
check, 2 on invalid input.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from pydantic import ValidationError

from jordangap.commands import (
    build_manifold,
    counterexample,
    gap_check,
    kwak_demo,
    operator_norm,
    tracking_test,
    verify_all,
)
from jordangap.commands.common import CommandContext, print_checks
from jordangap.errors import JordanGapError
from jordangap.export import dump_json
from jordangap.schemas.config import ExperimentConfig
from jordangap.settings import Settings

logger = logging.getLogger("jordangap.main")

# Register commands
COMMANDS = [gap_check, operator_norm, build_manifold, tracking_test, counterexample, kwak_demo, verify_all]

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_INVALID = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jordangap",
        description="Spectral gap conditions and inertial manifolds for Jordan-block parabolic systems",
    )
    parser.add_argument("--config", type=Path, help="Experiment config (JSON)")
    parser.add_argument("--out", type=Path, help="Output directory for reports")
    parser.add_argument("--seed", type=int, help="Random seed (unsigned 64-bit)")
    parser.add_argument("--tol-scale", type=float, help="Multiplier for every upper-bound tolerance")
    parser.add_argument("--workers", type=int, help="Thread-pool size")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for module in COMMANDS:
        module.register(subparsers)
    return parser


def load_config(path: Optional[Path]) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    return ExperimentConfig.model_validate(raw)


def resolve_context(args: argparse.Namespace, config: ExperimentConfig) -> CommandContext:
    """Flags win over the config file, the config file over the environment."""
    settings = Settings.get_instance()
    explicit = config.model_fields_set
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    elif "seed" not in explicit:
        updates["seed"] = settings.seed
    if args.tol_scale is not None:
        updates["tol_scale"] = args.tol_scale
    elif "tol_scale" not in explicit:
        updates["tol_scale"] = settings.tol_scale
    if args.workers is not None:
        updates["workers"] = args.workers
    if args.out is not None:
        updates["out_dir"] = str(args.out)
    # re-validate so flag values obey the same bounds as the file
    config = ExperimentConfig.model_validate({**config.model_dump(), **updates})

    workers = config.workers or settings.workers
    settings.workers = workers
    out_dir = Path(config.out_dir or settings.out_dir)
    return CommandContext(command=args.command, config=config, out_dir=out_dir, seed=config.seed,
                          tol_scale=config.tol_scale, workers=workers)


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        config = load_config(args.config)
        ctx = resolve_context(args, config)
    except (OSError, json.JSONDecodeError) as e:
        print(f"[FAIL] cannot read config: {e}", file=sys.stderr)
        return EXIT_INVALID
    except ValidationError as e:
        print(f"[FAIL] invalid config:\n{e}", file=sys.stderr)
        return EXIT_INVALID

    print("=" * 60)
    print(f"jordangap {ctx.command} (seed={ctx.seed}, tol_scale={ctx.tol_scale:g})")
    print("=" * 60)

    try:
        report = args.handler(ctx, args)
    except ValidationError as e:
        print(f"[FAIL] invalid parameters:\n{e}", file=sys.stderr)
        return EXIT_INVALID
    except JordanGapError as e:
        logger.error(f"{ctx.command} aborted: {e.detail}")
        print(f"[FAIL] {e.detail}", file=sys.stderr)
        return e.exit_code

    path = dump_json(report.payload(ctx), ctx.out_dir / f"{ctx.command}.json")
    if args.command != verify_all.COMMAND:
        print_checks(report.checks)

    failures = report.checks.failures
    print("\n" + "=" * 60)
    if failures:
        print(f"[FAIL] {len(failures)} of {len(report.checks.items)} checks failed: "
              + ", ".join(c.name for c in failures))
    else:
        print(f"[OK] {len(report.checks.items)} checks passed")
    print(f"Report: {path}")
    print("=" * 60)
    return EXIT_FAILED if failures else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
