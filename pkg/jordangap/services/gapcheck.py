"""
Spectral gap conditions, every one normalized to the single comparison
"lhs > L".
"""

import logging
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from jordangap.errors import GapIndexError, ParameterError
from jordangap.schemas.models import GapConditionKind, GapKind, SpectralGapReport
from jordangap.services import linop
from jordangap.services.spectra import EigenvalueLadder

logger = logging.getLogger("jordangap.gapcheck")

NORMALIZATION = {
    GapKind.SELF_ADJOINT_GENERAL: "(l_{n+1} - l_n) / (l_n^{-beta/2} + l_{n+1}^{-beta/2}) > L",
    GapKind.SELF_ADJOINT_ZERO: "l_{n+1} - l_n > 2L, divided by 2",
    GapKind.SELF_ADJOINT_HALF: "sqrt(l_{n+1}) - sqrt(l_n) > L",
    GapKind.JORDAN_FULL: "(l_{n+1} - l_n)^2 / (l_n + l_{n+1} + 2 sqrt(l_{n+1}^2 - l_n l_{n+1} + l_n^2)) > L",
    GapKind.JORDAN_TRUNCATED: "sqrt(l_{n+1}) - sqrt(l_n) > sqrt(L), squared",
    GapKind.JORDAN_SUFFICIENT: "(sqrt(l_{n+1}) - sqrt(l_n))^2 / 3 > L",
}


def as_kind(kind: Union[GapConditionKind, GapKind, str], beta: Optional[float] = None) -> GapConditionKind:
    if isinstance(kind, GapConditionKind):
        return kind
    return GapConditionKind(kind=GapKind(kind), beta=beta)


def _lhs_pair(a: float, b: float, kind: GapConditionKind) -> float:
    if not b > a:
        return 0.0
    k = kind.kind
    if k == GapKind.SELF_ADJOINT_GENERAL:
        e = -kind.beta / 2.0
        return (b - a) / (a ** e + b ** e)
    if k == GapKind.SELF_ADJOINT_ZERO:
        return (b - a) / 2.0
    if k == GapKind.SELF_ADJOINT_HALF:
        return float(linop.sqrt_gap(a, b))
    if k == GapKind.JORDAN_FULL:
        return (b - a) ** 2 / linop.gap_denominator(a, b)
    g = float(linop.sqrt_gap(a, b)) ** 2
    if k == GapKind.JORDAN_TRUNCATED:
        return g
    return g / 3.0


def gap_lhs(ladder: EigenvalueLadder, n: int, kind: Union[GapConditionKind, GapKind, str],
            beta: Optional[float] = None) -> float:
    """
    Normalized left-hand side of the gap condition at index n (1-based).
    Equal consecutive eigenvalues give 0.
    """
    if not 1 <= n < ladder.N:
        raise GapIndexError(f"gap index n={n} outside [1, {ladder.N - 1}]", check="gap_lhs")
    a, b = ladder.pair(n)
    return _lhs_pair(a, b, as_kind(kind, beta))


def theta_star(lambda_n: float, lambda_np1: float, kind: GapConditionKind) -> Optional[float]:
    if lambda_np1 <= lambda_n:
        return None
    if kind.kind in (GapKind.JORDAN_FULL, GapKind.JORDAN_SUFFICIENT):
        return linop.optimal_theta_full(lambda_n, lambda_np1).theta
    if kind.kind == GapKind.JORDAN_TRUNCATED:
        return linop.optimal_theta_truncated(lambda_n, lambda_np1).theta
    return None


def gap_report(ladder: EigenvalueLadder, n: int, L: float,
               kind: Union[GapConditionKind, GapKind, str], beta: Optional[float] = None) -> SpectralGapReport:
    kind = as_kind(kind, beta)
    lhs = gap_lhs(ladder, n, kind)
    a, b = ladder.pair(n)
    return SpectralGapReport(
        n=n, lambda_n=a, lambda_np1=b, lhs=lhs, L=L, satisfied=bool(lhs > L),
        kind=kind, normalization=NORMALIZATION[kind.kind], theta_star=theta_star(a, b, kind),
    )


def find_admissible_n(ladder: EigenvalueLadder, L: float,
                      kind: Union[GapConditionKind, GapKind, str], beta: Optional[float] = None) -> List[int]:
    """All gap indices n in [1, N-1] with gap_lhs(n) > L, ascending."""
    if not L > 0.0:
        raise ParameterError(f"Lipschitz constant must be positive (got {L!r})", check="find_admissible_n")
    kind = as_kind(kind, beta)
    return [n for n in range(1, ladder.N) if gap_lhs(ladder, n, kind) > L]


def gap_reports(ladder: EigenvalueLadder, L: float, kinds: Iterable[GapConditionKind],
                indices: Optional[Sequence[int]] = None) -> List[SpectralGapReport]:
    """Report table over kinds x indices (all gap indices when none given)."""
    idx = list(indices) if indices is not None else list(range(1, ladder.N))
    rows = []
    for kind in kinds:
        for n in idx:
            rows.append(gap_report(ladder, n, L, kind))
    logger.info(f"gap_reports: {len(rows)} rows, {sum(r.satisfied for r in rows)} satisfied")
    return rows


# ============================================================
# Two-sided inequality for the Jordan gap denominator
# ============================================================

def gap_equivalence_bounds(lambda_n: float, lambda_np1: float) -> Tuple[float, float]:
    """
    Outer bounds of
        (sqrt(l_n) + sqrt(l_{n+1}))^2 <= gap_denominator <= 3 (sqrt(l_n) + sqrt(l_{n+1}))^2,
    both strict when l_n < l_{n+1}.
    """
    s = (np.sqrt(lambda_n) + np.sqrt(lambda_np1)) ** 2
    return float(s), float(3.0 * s)


gap_denominator = linop.gap_denominator
