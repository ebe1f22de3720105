"""
Solution-operator norms for the linear Jordan-block problem
    d/dt xi + [[1,1],[0,1]] A xi = h(t)
in the exponentially weighted space L^2_{e^{theta t}}.

Closed forms for the full operator and its u-component, the optimal weights,
and an independent brute-force oracle that takes the sup of the 2x2
frequency-response norms over a frequency grid.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Tuple, Union

import numpy as np
from scipy import optimize

from jordangap.errors import DegenerateGapError, ParameterError, ResonanceError
from jordangap.schemas.models import NormMode, OperatorNormResult, WeightParameter
from jordangap.services.spectra import EigenvalueLadder
from jordangap.settings import Settings

logger = logging.getLogger("jordangap.linop")

RESONANCE_RTOL = 1e-12


# ============================================================
# Closed forms
# ============================================================

def mu_min(lam, theta, omega=0.0):
    """
    Smallest eigenvalue of A A* for A = [[lam - theta + i w, lam], [0, lam - theta + i w]].

    Evaluated as (2(d^2 + w^2) / (s + lam))^2 with d = lam - theta and
    s = sqrt(4(d^2 + w^2) + lam^2), which equals
    (2d^2 + 2w^2 + lam^2 - lam*s) / 2 without the cancellation.
    Accepts scalars or broadcastable arrays.
    """
    lam_arr = np.asarray(lam, dtype=float)
    if np.any(lam_arr <= 0.0):
        raise ParameterError(f"mu_min needs lambda > 0 (got {lam!r})", check="mu_min")
    d = lam_arr - np.asarray(theta, dtype=float)
    q = d * d + np.asarray(omega, dtype=float) ** 2
    s = np.sqrt(4.0 * q + lam_arr * lam_arr)
    out = (2.0 * q / (s + lam_arr)) ** 2
    return float(out) if np.ndim(out) == 0 else out


def nu_root(lam, theta):
    """Positive root of nu^2 + lam*nu - (lam - theta)^2 = 0 (equals sqrt(mu_min) at w = 0)."""
    lam = np.asarray(lam, dtype=float)
    d2 = (lam - np.asarray(theta, dtype=float)) ** 2
    out = 2.0 * d2 / (lam + np.sqrt(lam * lam + 4.0 * d2))
    return float(out) if np.ndim(out) == 0 else out


def block_inverse_norm(lam, theta, omega=0.0):
    """Spectral norm of the per-block inverse, 1/sqrt(mu_min)."""
    return 1.0 / np.sqrt(mu_min(lam, theta, omega))


def _check_gap(lambda_n: float, lambda_np1: float, check: str):
    if not (lambda_n > 0.0):
        raise ParameterError(f"lambda_n={lambda_n!r} must be positive", check=check)
    if not (lambda_n < lambda_np1):
        raise DegenerateGapError(
            f"need lambda_n < lambda_np1 (got {lambda_n!r}, {lambda_np1!r})", check=check
        )


def _root_term(a: float, b: float) -> float:
    """sqrt(b^2 - a*b + a^2) with the larger value factored out."""
    big = max(a, b)
    x, y = a / big, b / big
    return big * np.sqrt(x * x - x * y + y * y)


def gap_denominator(lambda_n: float, lambda_np1: float) -> float:
    """lambda_n + lambda_np1 + 2 sqrt(lambda_np1^2 - lambda_n lambda_np1 + lambda_n^2)."""
    return lambda_n + lambda_np1 + 2.0 * _root_term(lambda_n, lambda_np1)


def sqrt_gap(lambda_n: float, lambda_np1: float) -> float:
    """sqrt(lambda_np1) - sqrt(lambda_n) without cancellation."""
    return (lambda_np1 - lambda_n) / (np.sqrt(lambda_n) + np.sqrt(lambda_np1))


def optimal_theta_full(lambda_n: float, lambda_np1: float) -> WeightParameter:
    _check_gap(lambda_n, lambda_np1, "optimal_theta_full")
    theta = (2.0 / 3.0) * (lambda_np1 + lambda_n) - _root_term(lambda_n, lambda_np1) / 3.0
    return WeightParameter(theta=theta, lambda_n=lambda_n, lambda_np1=lambda_np1)


def norm_L_full(lambda_n: float, lambda_np1: float, n: int = 1) -> OperatorNormResult:
    """
    Minimal norm of the full solution operator, attained at theta* and omega = 0.
    n is the 1-based ladder index of lambda_n, reported as the attaining mode.
    """
    _check_gap(lambda_n, lambda_np1, "norm_L_full")
    gap = lambda_np1 - lambda_n
    norm = gap_denominator(lambda_n, lambda_np1) / (gap * gap)
    theta = optimal_theta_full(lambda_n, lambda_np1)
    # both gap eigenvalues attain the sup; report the lower one
    nu = 1.0 / norm
    return OperatorNormResult(
        norm=norm, theta=theta, mode=NormMode.FULL,
        attaining_mode=n, attaining_omega=0.0, mu_min=nu * nu, nu=nu,
    )


def optimal_theta_truncated(lambda_n: float, lambda_np1: float) -> WeightParameter:
    _check_gap(lambda_n, lambda_np1, "optimal_theta_truncated")
    theta = np.sqrt(lambda_n) * np.sqrt(lambda_np1)
    return WeightParameter(theta=float(theta), lambda_n=lambda_n, lambda_np1=lambda_np1)


def norm_L_truncated(lambda_n: float, lambda_np1: float, n: int = 1) -> OperatorNormResult:
    """Norm of the u-component operator L: 1/(sqrt(lambda_np1) - sqrt(lambda_n))^2, attained at both gap modes."""
    _check_gap(lambda_n, lambda_np1, "norm_L_truncated")
    g = sqrt_gap(lambda_n, lambda_np1)
    norm = 1.0 / (g * g)
    nu = 1.0 / np.sqrt(norm)
    return OperatorNormResult(
        norm=norm, theta=optimal_theta_truncated(lambda_n, lambda_np1), mode=NormMode.TRUNCATED,
        attaining_mode=n, attaining_omega=0.0, mu_min=nu * nu, nu=nu,
    )


def closed_form_norm(lambda_n: float, lambda_np1: float, mode: Union[NormMode, str], n: int = 1) -> OperatorNormResult:
    if NormMode(mode) == NormMode.FULL:
        return norm_L_full(lambda_n, lambda_np1, n)
    return norm_L_truncated(lambda_n, lambda_np1, n)


def per_mode_norms(ladder: EigenvalueLadder, theta: float, mode: Union[NormMode, str] = NormMode.FULL) -> np.ndarray:
    """Per-block norms at omega = 0 for every mode of the ladder."""
    lam = ladder.array()
    theta = float(theta)
    if NormMode(mode) == NormMode.FULL:
        return block_inverse_norm(lam, theta, 0.0)
    return lam / (lam - theta) ** 2


# ============================================================
# Minimax oracle for theta
# ============================================================

def _minimax_objective(theta: float, lambda_n: float, lambda_np1: float, mode: NormMode) -> float:
    if mode == NormMode.FULL:
        return max(1.0 / mu_min(lambda_n, theta), 1.0 / mu_min(lambda_np1, theta))
    return max(lambda_n / (lambda_n - theta) ** 2, lambda_np1 / (lambda_np1 - theta) ** 2)


def minimax_theta(lambda_n: float, lambda_np1: float,
                  mode: Union[NormMode, str] = NormMode.FULL, xtol: float = 1e-13) -> float:
    """
    Golden-section search for the theta minimizing the larger of the two
    gap-eigenvalue block norms. Independent of the closed forms.
    """
    _check_gap(lambda_n, lambda_np1, "minimax_theta")
    mode = NormMode(mode)
    width = lambda_np1 - lambda_n
    lo = lambda_n + 1e-9 * width
    hi = lambda_np1 - 1e-9 * width
    mid = lambda_n + 0.5 * width
    res = optimize.minimize_scalar(
        _minimax_objective,
        bracket=(lo, mid, hi),
        args=(lambda_n, lambda_np1, mode),
        method="golden",
        tol=xtol,
    )
    return float(res.x)


# ============================================================
# Frequency-grid oracle
# ============================================================

@dataclass(frozen=True)
class OmegaGrid:
    """
    Symmetric frequency grid on [-extent, extent] with a geometric refinement
    towards 0 and the exact point omega = 0.
    """

    extent: float
    points: int = 4001
    refine_points: int = 200
    refine_floor: float = 1e-8

    def values(self) -> np.ndarray:
        base = np.linspace(-self.extent, self.extent, self.points)
        top = self.extent / max(self.points - 1, 1)
        fine = np.geomspace(self.refine_floor * self.extent, top, self.refine_points)
        grid = np.concatenate([base, fine, -fine, [0.0]])
        return np.unique(grid)

    @classmethod
    def for_ladder(cls, ladder: EigenvalueLadder, factor: float = 10.0, points: int = 4001) -> "OmegaGrid":
        return cls(extent=factor * float(max(ladder.values)), points=points)


def _block_norms_full(lam: float, theta: float, omegas: np.ndarray) -> np.ndarray:
    """Spectral norms of inv([[lam-theta+iw, lam],[0, lam-theta+iw]]) by batched SVD."""
    z = (lam - theta) + 1j * omegas
    mats = np.zeros((omegas.size, 2, 2), dtype=complex)
    mats[:, 0, 0] = z
    mats[:, 1, 1] = z
    mats[:, 0, 1] = lam
    sv = np.linalg.svd(mats, compute_uv=False)
    return 1.0 / sv[:, -1]


def _block_norms_truncated(lam: float, theta: float, omegas: np.ndarray) -> np.ndarray:
    return np.abs(lam / ((lam - theta) + 1j * omegas) ** 2)


def _mode_sup(args) -> Tuple[float, int, float]:
    k, lam, theta, omegas, mode = args
    if mode == NormMode.FULL:
        vals = _block_norms_full(lam, theta, omegas)
    else:
        vals = _block_norms_truncated(lam, theta, omegas)
    top = vals.max()
    # smallest |omega| among the maximizers
    ties = np.flatnonzero(vals == top)
    j = ties[np.argmin(np.abs(omegas[ties]))]
    return float(top), k, float(omegas[j])


def oracle_norm(
    ladder: EigenvalueLadder,
    theta: Union[WeightParameter, float],
    omega_grid: Optional[OmegaGrid] = None,
    mode: Union[NormMode, str] = NormMode.FULL,
    workers: Optional[int] = None,
) -> OperatorNormResult:
    """
    Brute-force sup over modes k and grid frequencies omega of the per-block
    inverse norm. Reduction is deterministic: max value, then smallest k,
    then smallest |omega|.
    """
    mode = NormMode(mode)
    theta_val = float(theta)
    lam = ladder.array()
    near = np.abs(theta_val - lam) < RESONANCE_RTOL * lam
    if np.any(near):
        k = int(np.flatnonzero(near)[0]) + 1
        raise ResonanceError(f"theta={theta_val!r} resonates with lambda_{k}={lam[k - 1]!r}", check="oracle_norm")

    grid = omega_grid or OmegaGrid.for_ladder(ladder)
    omegas = grid.values()
    if grid.extent < 10.0 * lam.max() * (1.0 - 1e-12):
        logger.warning(f"omega grid extent {grid.extent:g} is below 10*max(lambda)={10 * lam.max():g}")

    workers = workers or Settings.get_instance().workers
    tasks = [(k + 1, float(lam[k]), theta_val, omegas, mode) for k in range(lam.size)]
    if workers > 1 and lam.size > 1:
        with ThreadPoolExecutor(max_workers=min(workers, lam.size)) as pool:
            results: List[Tuple[float, int, float]] = list(pool.map(_mode_sup, tasks))
    else:
        results = [_mode_sup(t) for t in tasks]

    best = max(results, key=lambda r: (r[0], -r[1], -abs(r[2])))
    norm, k_star, w_star = best
    lam_star = float(lam[k_star - 1])
    if mode == NormMode.FULL:
        mu = mu_min(lam_star, theta_val, w_star)
    else:
        mu = 1.0 / (norm * norm)
    logger.debug(f"oracle_norm[{mode.value}] theta={theta_val:.12g} -> {norm:.12g} at k={k_star}, w={w_star:g}")

    if isinstance(theta, WeightParameter):
        weight = theta
    else:
        weight = WeightParameter(theta=theta_val)
    return OperatorNormResult(
        norm=norm, theta=weight, mode=mode, attaining_mode=k_star,
        attaining_omega=w_star, mu_min=float(mu), nu=float(np.sqrt(mu)),
    )
