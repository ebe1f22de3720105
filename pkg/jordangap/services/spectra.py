"""
Eigenvalue ladders of the self-adjoint operator A and the spectral
projectors P_n / Q_n acting on coefficient arrays.
"""

from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from jordangap.errors import ParameterError, ShapeError, SizeError
from jordangap.schemas.models import (
    ExplicitLadder,
    LadderDescriptor,
    PeriodicLadder,
    PowerLadder,
    ProjectionPart,
)

GENERATOR_RTOL = 1e-14


def _generate(generator: LadderDescriptor, N: int) -> np.ndarray:
    """Materialize the first N values of a generator (no validation)."""
    if isinstance(generator, ExplicitLadder):
        return np.asarray(generator.values[:N], dtype=float)
    if isinstance(generator, PowerLadder):
        k = np.arange(1, N + 1, dtype=float)
        return generator.c * k ** generator.p
    if isinstance(generator, PeriodicLadder):
        start = 0 if generator.include_zero else 1
        j = np.arange(start, start + N)
        return generator.nu * np.ceil(j / 2.0) ** 2 + generator.shift
    raise ParameterError(f"Unknown ladder generator: {generator!r}")


class EigenvalueLadder(BaseModel):
    """Nondecreasing positive eigenvalues lambda_1..lambda_N with their generator."""

    model_config = ConfigDict(frozen=True)

    values: Tuple[float, ...] = Field(..., description="lambda_1 <= ... <= lambda_N")
    generator: LadderDescriptor

    @model_validator(mode="after")
    def _check(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.size == 0:
            raise ValueError("ladder is empty")
        if not np.all(np.isfinite(vals)):
            raise ValueError("ladder has non-finite entries")
        if vals[0] <= 0.0:
            raise ValueError(f"lambda_1={vals[0]!r} must be positive")
        if np.any(np.diff(vals) < 0.0):
            raise ValueError("ladder is not nondecreasing")
        expected = _generate(self.generator, vals.size)
        if expected.shape != vals.shape or np.any(
            np.abs(expected - vals) > GENERATOR_RTOL * np.abs(expected)
        ):
            raise ValueError("ladder values disagree with their generator")
        return self

    @property
    def N(self) -> int:
        return len(self.values)

    def array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    def pair(self, n: int) -> Tuple[float, float]:
        """(lambda_n, lambda_{n+1}) for a 1-based gap index n."""
        return self.values[n - 1], self.values[n]

    def __len__(self) -> int:
        return self.N


def make_ladder(generator: LadderDescriptor, N: int = None) -> EigenvalueLadder:
    """
    Materialize a ladder from its generator.

    Args:
        generator: explicit / power / periodic descriptor
        N: number of eigenvalues (defaults to the explicit list length)

    Returns:
        EigenvalueLadder satisfying positivity, ordering and generator consistency
    """
    if isinstance(generator, ExplicitLadder):
        if N is None:
            N = len(generator.values)
        if N > len(generator.values):
            raise SizeError(f"explicit ladder has {len(generator.values)} values, asked for N={N}")
        if any(v <= 0.0 for v in generator.values[:N]):
            raise ParameterError("explicit ladder values must be positive")
        if any(b < a for a, b in zip(generator.values[:N], generator.values[1:N])):
            raise ParameterError("explicit ladder values must be nondecreasing")
    elif isinstance(generator, PowerLadder):
        if generator.c <= 0.0 or generator.p <= 0.0:
            raise ParameterError(f"power ladder needs c>0, p>0 (got c={generator.c}, p={generator.p})")
    elif isinstance(generator, PeriodicLadder):
        if generator.nu <= 0.0:
            raise ParameterError(f"periodic ladder needs nu>0 (got {generator.nu})")
        if generator.shift < 0.0 or (generator.include_zero and generator.shift <= 0.0):
            raise ParameterError("periodic ladder shift must keep every eigenvalue positive")

    if N is None or N < 2:
        raise SizeError(f"ladder needs N >= 2 (got {N})")

    values = tuple(float(v) for v in _generate(generator, N))
    return EigenvalueLadder(values=values, generator=generator)


def ladder_gaps(ladder: EigenvalueLadder) -> np.ndarray:
    """lambda_{k+1} - lambda_k for k = 1..N-1."""
    return np.diff(ladder.array())


def fourier_eigenvalues(N_f: int, nu: float = 1.0, shift: float = 0.0) -> np.ndarray:
    """nu*k^2 + shift on the two-sided Fourier modes k = -N_f..N_f."""
    k = np.arange(-N_f, N_f + 1, dtype=float)
    return nu * k ** 2 + shift


# =============================================
# PROJECTORS
# =============================================

@dataclass(frozen=True)
class SpectralProjector:
    """P_n keeps the first n modes; Q_n = I - P_n keeps the rest."""

    n: int
    total: int

    def __post_init__(self):
        if not 0 <= self.n <= self.total:
            raise ParameterError(f"projector index n={self.n} outside [0, {self.total}]")

    def mask(self, part: Union[ProjectionPart, str]) -> np.ndarray:
        low = np.arange(self.total) < self.n
        return low if ProjectionPart(part) == ProjectionPart.LOW else ~low


def project(x, proj: SpectralProjector, part: Union[ProjectionPart, str]) -> np.ndarray:
    """Apply P_n (low) or Q_n (high) along the last axis of x."""
    arr = np.asarray(x)
    if arr.ndim == 0 or arr.shape[-1] != proj.total:
        raise ShapeError(f"expected last axis of length {proj.total}, got shape {arr.shape}")
    return np.where(proj.mask(part), arr, np.zeros((), dtype=arr.dtype))


def dimension_of_base(m: int, n: int) -> int:
    """Coordinate count of P_n H for an m-component state."""
    return m * n


def power_law_gap_growth(ladder: EigenvalueLadder) -> bool:
    """True if consecutive gaps are nondecreasing (expected for power ladders with p >= 1)."""
    gaps = ladder_gaps(ladder)
    scale = max(1.0, float(np.max(np.abs(gaps))))
    return bool(np.all(np.diff(gaps) >= -1e-12 * scale))
