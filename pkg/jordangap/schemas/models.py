"""
Pydantic models shared across services: ladder descriptors, gap-condition
kinds, result records and report rows.
"""

from enum import Enum
from typing import Annotated, Any, Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator


# =============================================
# ENUMS
# =============================================

class NormMode(str, Enum):
    """Which solution operator: the full 2x2 block or its u-component."""
    FULL = "full"
    TRUNCATED = "truncated"


class NonlinearityForm(str, Enum):
    GENERAL = "general"
    LOWER_TRIANGULAR = "lower_triangular"


class ProjectionPart(str, Enum):
    LOW = "low"
    HIGH = "high"


class GapKind(str, Enum):
    """Spectral gap conditions, each normalized to 'lhs > L'."""
    SELF_ADJOINT_GENERAL = "self_adjoint_general"
    SELF_ADJOINT_ZERO = "self_adjoint_zero"
    SELF_ADJOINT_HALF = "self_adjoint_half"
    JORDAN_FULL = "jordan_full"
    JORDAN_TRUNCATED = "jordan_truncated"
    JORDAN_SUFFICIENT = "jordan_sufficient"


# =============================================
# LADDER DESCRIPTORS
# =============================================

class ExplicitLadder(BaseModel):
    model_config = ConfigDict(frozen=True)
    kind: Literal["explicit"] = "explicit"
    values: Tuple[float, ...] = Field(..., description="Eigenvalues in nondecreasing order")


class PowerLadder(BaseModel):
    model_config = ConfigDict(frozen=True)
    kind: Literal["power"] = "power"
    c: float = Field(1.0, description="Prefactor in c*k^p")
    p: float = Field(2.0, description="Exponent in c*k^p")


class PeriodicLadder(BaseModel):
    """Periodic Laplacian on (-pi, pi): nu*ceil(j/2)^2 + shift, each value twice."""
    model_config = ConfigDict(frozen=True)
    kind: Literal["periodic"] = "periodic"
    nu: float = Field(1.0, description="Viscosity / diffusion coefficient")
    shift: float = Field(0.0, description="Constant added to every eigenvalue (1 for 1 - d_xx)")
    include_zero: bool = Field(False, description="Start the ladder at the k=0 mode")


LadderDescriptor = Annotated[
    Union[ExplicitLadder, PowerLadder, PeriodicLadder],
    Field(discriminator="kind"),
]


# =============================================
# WEIGHTS AND NORMS
# =============================================

class WeightParameter(BaseModel):
    """Exponent theta of the weight e^{theta t}, strictly inside its gap."""
    model_config = ConfigDict(frozen=True)
    theta: float = Field(..., gt=0.0, description="Weight exponent")
    lambda_n: Optional[float] = Field(None, description="Lower gap eigenvalue")
    lambda_np1: Optional[float] = Field(None, description="Upper gap eigenvalue")

    @model_validator(mode="after")
    def _inside_gap(self):
        if self.lambda_n is not None and not self.theta > self.lambda_n:
            raise ValueError(f"theta={self.theta!r} must exceed lambda_n={self.lambda_n!r}")
        if self.lambda_np1 is not None and not self.theta < self.lambda_np1:
            raise ValueError(f"theta={self.theta!r} must be below lambda_np1={self.lambda_np1!r}")
        return self

    def __float__(self) -> float:
        return self.theta


class OperatorNormResult(BaseModel):
    norm: float = Field(..., gt=0.0, description="Operator norm of the solution operator")
    theta: WeightParameter
    mode: NormMode = NormMode.FULL
    attaining_mode: Optional[int] = Field(None, description="1-based mode index k attaining the sup")
    attaining_omega: float = Field(0.0, description="Frequency attaining the sup")
    mu_min: float = Field(..., ge=0.0, description="Smallest eigenvalue of A A* at the attaining point")
    nu: float = Field(..., ge=0.0, description="sqrt(mu_min)")

    def to_report(self) -> Dict[str, Any]:
        return {
            "norm": self.norm,
            "theta": self.theta.theta,
            "mode": self.mode.value,
            "attaining_mode": self.attaining_mode,
            "attaining_omega": self.attaining_omega,
            "mu_min": self.mu_min,
            "nu": self.nu,
        }


# =============================================
# GAP CONDITIONS
# =============================================

class GapConditionKind(BaseModel):
    model_config = ConfigDict(frozen=True)
    kind: GapKind
    beta: Optional[float] = Field(None, description="Smoothness exponent, only for self_adjoint_general")

    @model_validator(mode="after")
    def _beta_range(self):
        if self.kind == GapKind.SELF_ADJOINT_GENERAL:
            if self.beta is None:
                raise ValueError("self_adjoint_general needs beta")
            if not (-2.0 < self.beta <= 0.0):
                raise ValueError(f"beta={self.beta!r} outside (-2, 0]")
        elif self.beta is not None:
            raise ValueError(f"beta is only meaningful for self_adjoint_general, got kind={self.kind.value}")
        return self

    @property
    def label(self) -> str:
        if self.kind == GapKind.SELF_ADJOINT_GENERAL:
            return f"{self.kind.value}(beta={self.beta:g})"
        return self.kind.value


class SpectralGapReport(BaseModel):
    n: int
    lambda_n: float
    lambda_np1: float
    lhs: float = Field(..., ge=0.0, description="Normalized left-hand side")
    L: float
    satisfied: bool = Field(..., description="lhs > L (strict)")
    kind: GapConditionKind
    normalization: str = Field(..., description="How the condition was rewritten as lhs > L")
    theta_star: Optional[float] = Field(None, description="Optimal weight for jordan kinds")


# =============================================
# PERRON / TRACKING
# =============================================

class TrackingReport(BaseModel):
    theta: float = Field(..., description="Decay exponent the tracking estimate predicts")
    fitted_rate: float = Field(..., description="Rate from the log-linear fit of ||xi - xi_bar||")
    constant: float = Field(..., description="sup_t e^{theta t} ||xi(t) - xi_bar(t)||")
    fit_window: Tuple[float, float]
    residuals: List[float] = Field(default_factory=list, description="Fit residuals of log||xi - xi_bar||")
    iterations: int = 0
    contraction_rate: float = 0.0
    at_noise_floor: bool = False


class InvarianceReport(BaseModel):
    sample_times: List[float]
    defects: List[float]
    max_defect: float
    horizon: float


# =============================================
# SHARPNESS
# =============================================

class OscillationReport(BaseModel):
    omega: float = Field(..., description="Imaginary part of the complex pair")
    mu: float = Field(..., description="Real part of the complex pair")
    zero_count: int = Field(..., ge=0, description="Sign changes of x(t) on the window")
    horizon: float
    verdict: bool = Field(..., description="Graph over P_n H impossible")
    closed_form_error: Optional[float] = Field(None, description="Max |x e^{mu t} - (x0 cos + y0 sin)| (full mode)")


class GapViolationRow(BaseModel):
    n: int
    lhs: float
    violated: bool
    counterexample_norm: Optional[float] = None
    epsilon: Optional[float] = None


class GapViolationReport(BaseModel):
    kind: GapConditionKind
    L: float
    rows: List[GapViolationRow]
    sup_lhs: float
    sup_violated: bool = Field(..., description="sup_n lhs < L: every gap index fails")


# =============================================
# CHECKS
# =============================================

class CheckResult(BaseModel):
    """One pass/fail comparison against a tolerance."""
    name: str
    value: Optional[float] = None
    threshold: Optional[float] = None
    passed: bool
    detail: Optional[str] = None
