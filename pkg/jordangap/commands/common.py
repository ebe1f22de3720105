"""
Shared plumbing for subcommands: the run context handed to every handler
and the report each handler returns.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from jordangap.export import dump_csv
from jordangap.schemas.config import ExperimentConfig
from jordangap.services.acceptance import CheckList
from jordangap.services.spectra import EigenvalueLadder, make_ladder

logger = logging.getLogger("jordangap.commands")


@dataclass
class CommandContext:
    """Resolved config plus the overrides that came from flags or the environment."""

    command: str
    config: ExperimentConfig
    out_dir: Path
    seed: int
    tol_scale: float
    workers: int
    rng: np.random.Generator = field(init=False)

    def __post_init__(self):
        self.rng = np.random.default_rng(self.seed)

    def ladder(self) -> EigenvalueLadder:
        return make_ladder(self.config.ladder, self.config.size)

    def checklist(self) -> CheckList:
        return CheckList(tol_scale=self.tol_scale)


@dataclass
class CommandReport:
    """What a handler produced: checks, JSON-able results and written CSV paths."""

    checks: CheckList
    results: Dict[str, Any] = field(default_factory=dict)
    artifacts: List[Path] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.checks.passed

    def write_csv(self, ctx: CommandContext, frame: pd.DataFrame, name: str) -> Path:
        path = dump_csv(frame, ctx.out_dir / name)
        self.artifacts.append(path)
        return path

    def payload(self, ctx: CommandContext) -> Dict[str, Any]:
        return {
            "command": ctx.command,
            "config": ctx.config.model_dump(mode="json"),
            "seed": ctx.seed,
            "tol_scale": ctx.tol_scale,
            "passed": self.passed,
            "checks": self.checks.items,
            "results": self.results,
            "artifacts": sorted(p.name for p in self.artifacts),
        }


def print_checks(checks: CheckList, title: Optional[str] = None):
    if title:
        print(f"\n[*] {title}")
    for c in checks.items:
        tag = "[OK]" if c.passed else "[FAIL]"
        value = f" value={c.value:.6g}" if c.value is not None else ""
        threshold = f" threshold={c.threshold:.6g}" if c.threshold is not None else ""
        detail = f" ({c.detail})" if c.detail and not c.passed else ""
        print(f"    {tag} {c.name}{value}{threshold}{detail}")
