"""
Experiment configuration: one JSON document per run, validated here and
embedded verbatim in every report.
"""

from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from jordangap.schemas.models import (
    ExplicitLadder,
    GapConditionKind,
    GapKind,
    LadderDescriptor,
    NonlinearityForm,
    NormMode,
    PowerLadder,
)


DEFAULT_N = 16


def _default_kinds() -> List[GapConditionKind]:
    return [
        GapConditionKind(kind=GapKind.SELF_ADJOINT_ZERO),
        GapConditionKind(kind=GapKind.SELF_ADJOINT_HALF),
        GapConditionKind(kind=GapKind.JORDAN_FULL),
        GapConditionKind(kind=GapKind.JORDAN_TRUNCATED),
        GapConditionKind(kind=GapKind.JORDAN_SUFFICIENT),
    ]


class SolverConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")
    T: Optional[float] = Field(None, gt=0.0, description="Half-line truncation; auto from the gap margins")
    dt: Optional[float] = Field(None, gt=0.0, description="Perron grid step; default 0.01 / lambda_{n+1}")
    tol: float = Field(1e-10, gt=0.0, description="Relative fixed-point tolerance")
    max_iter: int = Field(200, ge=1)
    noise_floor: float = Field(1e-13, gt=0.0)


class NonlinearityConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")
    kind: Literal["saturating", "zero"] = "saturating"
    form: NonlinearityForm = NonlinearityForm.GENERAL
    m: Literal[2, 3] = 2


class ManifoldConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")
    samples: int = Field(21, ge=2, description="Base points for the Lipschitz estimate")
    scale: float = Field(0.5, gt=0.0, description="Std of random base-point coordinates")
    horizon: float = Field(2.0, gt=0.0, description="Forward time for the invariance check")
    invariance_samples: int = Field(5, ge=1)


class TrackingConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")
    t_plus: float = Field(4.0, gt=1.0, description="Length of the forward solution")
    amplitude: float = Field(1.0, gt=0.0)
    dt: Optional[float] = Field(None, gt=0.0)


class CounterexampleConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")
    lambda_n: Optional[float] = Field(None, gt=0.0, description="Defaults to the ladder's lambda_n")
    lambda_np1: Optional[float] = Field(None, gt=0.0)
    epsilon: Optional[float] = Field(None, ge=0.0, description="Default 1e-2 sqrt(lambda_n lambda_{n+1})")
    mode: NormMode = NormMode.TRUNCATED
    periods: float = Field(3.0, gt=0.0)


class KwakConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")
    nu: float = Field(1.0, gt=0.0)
    N_f: int = Field(32, ge=8)
    T: float = Field(0.5, gt=0.0)
    dt: float = Field(1e-3, gt=0.0)
    decay: float = Field(4.0, gt=0.0, description="Initial data coefficients ~ k^{-decay}")
    amplitude: float = Field(0.5, gt=0.0)
    burgers_f: str = "0.1*u**3"
    rda_f: str = "-u**3 + 0.1*u*ux"


class OmegaConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")
    points: int = Field(4001, ge=3)
    factor: float = Field(10.0, gt=0.0, description="Grid extent in units of lambda_{n+1}")


class AcceptanceConfig(BaseModel):
    """Sample sizes of the acceptance suite; lower them for quick runs."""
    model_config = ConfigDict(extra="forbid")
    ladders: int = Field(100, ge=1)
    pairs: int = Field(1000, ge=1)
    grid: int = Field(50, ge=3)
    propagators: int = Field(1000, ge=1)
    lipschitz_pairs: int = Field(500, ge=1)


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    ladder: LadderDescriptor = Field(default_factory=PowerLadder)
    N: Optional[int] = Field(None, ge=2, description="Ladder size; explicit ladders default to their length, others to 16")
    n: int = Field(3, ge=1, description="Gap index (1-based)")
    L: float = Field(0.5, gt=0.0, description="Lipschitz constant of the nonlinearity")
    kind: GapKind = GapKind.JORDAN_FULL
    beta: Optional[float] = None
    theta: Optional[float] = Field(None, gt=0.0, description="Weight exponent; default is the optimum for the gap at n")
    kinds: List[GapConditionKind] = Field(default_factory=_default_kinds)

    solver: SolverConfig = Field(default_factory=SolverConfig)
    nonlinearity: NonlinearityConfig = Field(default_factory=NonlinearityConfig)
    manifold: ManifoldConfig = Field(default_factory=ManifoldConfig)
    tracking: TrackingConfig = Field(default_factory=TrackingConfig)
    counterexample: CounterexampleConfig = Field(default_factory=CounterexampleConfig)
    kwak: KwakConfig = Field(default_factory=KwakConfig)
    omega: OmegaConfig = Field(default_factory=OmegaConfig)
    acceptance: AcceptanceConfig = Field(default_factory=AcceptanceConfig)

    seed: int = Field(0, ge=0, lt=2 ** 64)
    out_dir: Optional[str] = None
    workers: Optional[int] = Field(None, ge=1)
    tol_scale: float = Field(1.0, gt=0.0)

    @model_validator(mode="after")
    def _check(self):
        if self.n >= self.size:
            raise ValueError(f"gap index n={self.n} must be below N={self.size}")
        GapConditionKind(kind=self.kind, beta=self.beta)
        return self

    @property
    def size(self) -> int:
        if self.N is not None:
            return self.N
        if isinstance(self.ladder, ExplicitLadder):
            return len(self.ladder.values)
        return DEFAULT_N

    @property
    def condition(self) -> GapConditionKind:
        return GapConditionKind(kind=self.kind, beta=self.beta)
