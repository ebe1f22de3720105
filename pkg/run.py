"""
Run a jordangap experiment from the repository root.
Usage: python run.py [--config cfg.json] [--out out/] <subcommand> ...

Subcommands: gap-check, operator-norm, build-manifold, tracking-test,
counterexample, kwak-demo {burgers,rda}, verify-all
"""

import logging
import sys

from jordangap.main import main
from jordangap.settings import Settings


def setup_logging():
    settings = Settings.get_instance()
    logging.basicConfig(
        level=settings.numeric_log_level,
        format="%(asctime)s %(levelname)-7s %(name)s: %(message)s",
    )


if __name__ == "__main__":
    setup_logging()
    sys.exit(main())
