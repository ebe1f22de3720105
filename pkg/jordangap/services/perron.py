"""
Perron construction of the inertial manifold for Galerkin-truncated
Jordan-block systems.

Everything runs in the weighted variable zeta(t) = e^{theta t} xi(t), which
solves the shifted linear problem

    d/dt zeta_k + B_k zeta_k = e^{theta t} h_k(t),    B_k = (lambda_k - theta) I + lambda_k (J - I).

Modes above the gap (lambda_k > theta) are integrated forward from zero at the
left end of the grid, modes below the gap backward from zero at the right end.
Forcing is interpolated piecewise linearly and integrated exactly against the
block exponentials (dynamics.jordan_moments); the resulting linear
recurrences are run with scipy.signal.lfilter, one triangular component at a
time.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import signal
from scipy.integrate import trapezoid

from jordangap.cache import SampleCache
from jordangap.errors import NoContractionError, ParameterError, ResonanceError, SupportError
from jordangap.schemas.models import InvarianceReport, NonlinearityForm, NormMode, TrackingReport, WeightParameter
from jordangap.services import linop
from jordangap.services.dynamics import (
    JordanSystem,
    StateVector,
    Trajectory,
    evolve,
    jordan_moments,
    nilpotent_powers,
)
from jordangap.services.spectra import SpectralProjector, dimension_of_base, project
from jordangap.settings import Settings

logger = logging.getLogger("jordangap.perron")


@dataclass
class PerronSettings:
    T: Optional[float] = None          # truncation horizon; auto from the gap margins
    dt: Optional[float] = None         # grid step; default 0.01 / lambda_{n+1}
    tol: float = 1e-10                 # relative weighted-norm change to stop
    max_iter: int = 200
    tail: float = 1e-10                # e^{-margin T} target for the auto horizon
    noise_floor: float = 1e-13         # differences below this (relative) are not used for the rate


def default_horizon(theta: float, lambda_n: float, lambda_np1: float, tail: float = 1e-10) -> float:
    margin = min(theta - lambda_n, lambda_np1 - theta)
    if not margin > 0.0:
        raise ResonanceError(f"theta={theta!r} is not strictly inside ({lambda_n!r}, {lambda_np1!r})")
    return math.log(1.0 / tail) / margin


def smoothstep(t: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Cutoff phi = 6s^5 - 15s^4 + 10s^3 on [0, 1] (0 before, 1 after) and its derivative."""
    s = np.clip(t, 0.0, 1.0)
    phi = s ** 3 * (10.0 + s * (-15.0 + 6.0 * s))
    dphi = 30.0 * s ** 2 * (1.0 - s) ** 2
    return phi, dphi


# ============================================================
# Weighted trajectories
# ============================================================

@dataclass
class WeightedTrajectory:
    """Grid plus weighted states zeta = e^{theta t} xi, shape (M+1, m, N)."""

    times: np.ndarray
    weighted: np.ndarray
    theta: float

    def __post_init__(self):
        if np.any(np.diff(self.times) <= 0.0):
            raise ParameterError("weighted trajectory grid must be strictly increasing")

    @property
    def states(self) -> np.ndarray:
        return np.exp(-self.theta * self.times)[:, None, None] * self.weighted

    def state(self, j: int) -> StateVector:
        return StateVector(self.states[j])

    def index_of(self, t: float) -> int:
        return int(np.argmin(np.abs(self.times - t)))

    def norm(self, component: Optional[int] = None) -> float:
        """sqrt(int e^{2 theta t} ||xi(t)||^2 dt), trapezoid rule."""
        z = self.weighted if component is None else self.weighted[:, component:component + 1, :]
        sq = np.sum(np.abs(z) ** 2, axis=(-2, -1))
        return float(np.sqrt(trapezoid(sq, self.times)))

    def to_trajectory(self) -> Trajectory:
        return Trajectory(times=self.times, states=self.states, scheme="perron", order=2)


def weighted_norm(times: np.ndarray, z: np.ndarray) -> float:
    return float(np.sqrt(trapezoid(np.sum(np.abs(z) ** 2, axis=(-2, -1)), times)))


def _grid(t0: float, t1: float, dt: float) -> np.ndarray:
    steps = max(2, int(math.ceil((t1 - t0) / dt - 1e-9)))
    return np.linspace(t0, t1, steps + 1)


# ============================================================
# Linear solution operators
# ============================================================

def _triangular_recurrence(E: np.ndarray, drive: np.ndarray) -> np.ndarray:
    """
    x_{j+1} = E x_j + drive_j with x_0 = 0, E upper triangular with constant
    diagonal. drive has shape (..., M, m); returns (..., M+1, m).
    """
    m = E.shape[0]
    a = E[0, 0]
    M = drive.shape[-2]
    x = np.zeros(drive.shape[:-2] + (M + 1, m), dtype=drive.dtype)
    for c in range(m - 1, -1, -1):
        d = drive[..., :, c]
        for e in range(c + 1, m):
            if E[c, e] != 0.0:
                d = d + E[c, e] * x[..., :M, e]
        x[..., 1:, c] = signal.lfilter([1.0], [1.0, -a], d, axis=-1)
    return x


class WeightedKernel:
    """
    Discrete solution operator of the shifted linear problem on a uniform grid,
    exact for piecewise-linear forcing.
    """

    def __init__(self, lams: np.ndarray, pattern: np.ndarray, theta: float, times: np.ndarray):
        lams = np.asarray(lams, dtype=float)
        near = np.abs(theta - lams) < linop.RESONANCE_RTOL * lams
        if np.any(near):
            k = int(np.flatnonzero(near)[0]) + 1
            raise ResonanceError(f"theta={theta!r} resonates with lambda_{k}={lams[k - 1]!r}", check="apply_L")
        self.lams = lams
        self.pattern = pattern
        self.theta = float(theta)
        self.times = times
        self.h = float(times[1] - times[0])
        self.n_low = int(np.sum(lams < theta))
        sigma = lams - theta
        E, I0, I1 = jordan_moments(sigma, lams, self.h, pattern)
        self.E = E
        self.W1 = I1 / self.h
        self.W0 = I0 - self.W1
        self.E_inv = jordan_moments(sigma, lams, -self.h, pattern)[0]

    def _step_forcing(self, g: np.ndarray, k: slice) -> np.ndarray:
        # c_j = W0 g_{j+1} + W1 g_j on modes k; g (..., M+1, m, N) -> (..., M, m, Nk)
        return (np.einsum("kab,...jbk->...jak", self.W0[k], g[..., 1:, :, k])
                + np.einsum("kab,...jbk->...jak", self.W1[k], g[..., :-1, :, k]))

    def apply(self, g: np.ndarray) -> np.ndarray:
        """Weighted solution zeta for weighted forcing g, both (..., M+1, m, N)."""
        out = np.zeros(g.shape, dtype=np.result_type(g, float))
        N = self.lams.size
        n = self.n_low
        if n < N:
            c = self._step_forcing(g, slice(n, N))
            for i, k in enumerate(range(n, N)):
                out[..., :, :, k] = _triangular_recurrence(self.E[k], c[..., :, :, i])
        if n > 0:
            c = self._step_forcing(g, slice(0, n))
            for k in range(n):
                # zeta_j = E^{-1} (zeta_{j+1} - c_j), run in reversed time from zeta_M = 0
                drive = -np.einsum("ab,...jb->...ja", self.E_inv[k], c[..., ::-1, :, k])
                out[..., ::-1, :, k] = _triangular_recurrence(self.E_inv[k], drive)
        return out

    def apply_mode(self, k: int, g: np.ndarray) -> np.ndarray:
        """Same operator restricted to one mode; g has shape (..., M+1, m)."""
        c = (np.einsum("ab,...jb->...ja", self.W0[k], g[..., 1:, :])
             + np.einsum("ab,...jb->...ja", self.W1[k], g[..., :-1, :]))
        if self.lams[k] > self.theta:
            return _triangular_recurrence(self.E[k], c)
        drive = -np.einsum("ab,...jb->...ja", self.E_inv[k], c[..., ::-1, :])
        return _triangular_recurrence(self.E_inv[k], drive)[..., ::-1, :]

    def homogeneous(self, xi0_plus: np.ndarray) -> np.ndarray:
        """Weighted backward homogeneous solution through xi0_plus at t = 0 (low modes only)."""
        t = self.times
        sigma = self.lams - self.theta
        powers = nilpotent_powers(self.pattern)
        m = self.pattern.shape[0]
        coef = np.empty((t.size, self.lams.size, m))
        for j in range(m):
            coef[..., j] = np.exp(-np.outer(t, sigma)) * (-np.outer(t, self.lams)) ** j / math.factorial(j)
        prop = np.einsum("tkj,jab->tkab", coef, powers)
        out = np.einsum("tkab,bk->tak", prop, xi0_plus)
        out[..., self.n_low:] = 0.0
        return out


def _resolve_theta(system: JordanSystem, n: int, theta: Optional[float]) -> float:
    lam_n, lam_np1 = system.ladder.pair(n)
    if theta is not None:
        theta = float(theta)
        WeightParameter(theta=theta, lambda_n=lam_n, lambda_np1=lam_np1)
        return theta
    if system.m != 2:
        raise ParameterError("an explicit theta is needed for Jordan size m != 2", check="solve_backward")
    if system.nonlinearity.form == NonlinearityForm.LOWER_TRIANGULAR:
        return linop.optimal_theta_truncated(lam_n, lam_np1).theta
    return linop.optimal_theta_full(lam_n, lam_np1).theta


def half_line_grid(system: JordanSystem, n: int, theta: float, settings: PerronSettings) -> np.ndarray:
    lam_n, lam_np1 = system.ladder.pair(n)
    T = settings.T if settings.T is not None else default_horizon(theta, lam_n, lam_np1, settings.tail)
    dt = settings.dt if settings.dt is not None else 0.01 / lam_np1
    return _grid(-T, 0.0, dt)


def apply_L(system: JordanSystem, theta: float, h: WeightedTrajectory) -> WeightedTrajectory:
    """
    Weighted-space solution of d/dt xi + (J kron A) xi = h on the grid of h:
    modes above theta start from zero at the left end, modes below theta end
    at zero at t = 0 (so P_n xi(0) = 0).
    """
    kernel = WeightedKernel(system.lams, system.pattern, float(theta), h.times)
    return WeightedTrajectory(times=h.times, weighted=kernel.apply(h.weighted), theta=float(theta))


def _check_support(system: JordanSystem, n: int, xi0_plus) -> np.ndarray:
    arr = system.state(xi0_plus.components if isinstance(xi0_plus, StateVector) else xi0_plus).components
    proj = SpectralProjector(n=n, total=system.N)
    if np.any(project(arr, proj, "high") != 0.0):
        raise SupportError("xi0_plus has nonzero entries above the gap index", check="apply_T")
    return np.asarray(arr, dtype=float)


def apply_T(system: JordanSystem, theta: float, xi0_plus, times: np.ndarray, n: Optional[int] = None) -> WeightedTrajectory:
    """Backward homogeneous solution with P_n xi(0) = xi0_plus, high modes zero."""
    theta = float(theta)
    if n is None:
        n = int(np.sum(system.lams < theta))
    data = _check_support(system, n, xi0_plus)
    kernel = WeightedKernel(system.lams, system.pattern, theta, times)
    return WeightedTrajectory(times=times, weighted=kernel.homogeneous(data), theta=theta)


# ============================================================
# Fixed point
# ============================================================

@dataclass
class SolveResult:
    trajectory: WeightedTrajectory
    iterations: int
    contraction_rate: float
    residuals: List[float] = field(default_factory=list)


def _contraction_rate(diffs: Sequence[float], floor: float) -> float:
    ratios = [b / a for a, b in zip(diffs[:-1], diffs[1:]) if a > floor and b > floor]
    return max(ratios) if ratios else 0.0


def _fixed_point(
    kernel: WeightedKernel,
    weighted_rhs,
    z_init: np.ndarray,
    z_hom: np.ndarray,
    settings: PerronSettings,
    component: Optional[int],
    check: str,
) -> Tuple[np.ndarray, int, float, List[float]]:
    """Picard iteration z <- K(weighted_rhs(z)) + z_hom until the relative change is below tol."""
    times = kernel.times

    def measure(z):
        if component is None:
            return weighted_norm(times, z)
        return weighted_norm(times, z[:, component:component + 1, :])

    z = z_init
    diffs: List[float] = []
    residuals: List[float] = []
    for it in range(1, settings.max_iter + 1):
        z_new = kernel.apply(weighted_rhs(z)) + z_hom
        diff = measure(z_new - z)
        scale = max(measure(z_new), np.finfo(float).tiny)
        diffs.append(diff)
        residuals.append(diff / scale)
        z = z_new
        rate = _contraction_rate(diffs, settings.noise_floor * scale)
        if rate >= 1.0:
            raise NoContractionError(
                f"{check}: measured contraction rate {rate:.4f} >= 1 at iteration {it}",
                rate=rate, iteration=it, check=check,
            )
        if diff <= settings.tol * scale:
            logger.debug(f"{check}: converged in {it} iterations, rate={rate:.4f}")
            return z, it, rate, residuals
    rate = _contraction_rate(diffs, settings.noise_floor * scale)
    raise NoContractionError(
        f"{check}: no convergence after {settings.max_iter} iterations (rate {rate:.4f}, residual {residuals[-1]:.3e})",
        rate=rate, iteration=settings.max_iter, check=check,
    )


def _contraction_norm(system: JordanSystem, theta: float) -> float:
    """sup_k of the per-block norm at omega = 0 (the norm of the solution operator at this theta)."""
    mode = NormMode.TRUNCATED if system.nonlinearity.form == NonlinearityForm.LOWER_TRIANGULAR else NormMode.FULL
    return float(np.max(linop.per_mode_norms(system.ladder, theta, mode)))


def solve_backward(system: JordanSystem, n: int, xi0_plus, theta: Optional[float] = None,
                   settings: Optional[PerronSettings] = None) -> SolveResult:
    """
    Fixed point xi = L F(xi) + T xi0_plus on the truncated half-line [-T, 0].

    For the lower-triangular form the default weight is sqrt(lambda_n lambda_{n+1})
    and convergence is measured on the u-component.
    """
    settings = settings or PerronSettings()
    theta = _resolve_theta(system, n, theta)
    times = half_line_grid(system, n, theta, settings)
    data = _check_support(system, n, xi0_plus)

    bound = system.nonlinearity.L * _contraction_norm(system, theta)
    if bound >= 1.0:
        logger.warning(f"solve_backward: L*||L|| = {bound:.4f} >= 1, the gap condition fails at n={n}")

    kernel = WeightedKernel(system.lams, system.pattern, theta, times)
    z_hom = kernel.homogeneous(data)
    decay = np.exp(-theta * times)[:, None, None]
    grow = np.exp(theta * times)[:, None, None]
    F = system.nonlinearity

    def weighted_rhs(z):
        with np.errstate(over="ignore", invalid="ignore"):
            return grow * F(decay * z)

    component = 0 if F.form == NonlinearityForm.LOWER_TRIANGULAR else None
    z, iters, rate, residuals = _fixed_point(kernel, weighted_rhs, z_hom, z_hom, settings, component, "solve_backward")
    logger.info(f"solve_backward n={n} theta={theta:.6g}: {iters} iterations, rate={rate:.4f} (bound {bound:.4f})")
    return SolveResult(
        trajectory=WeightedTrajectory(times=times, weighted=z, theta=theta),
        iterations=iters, contraction_rate=rate, residuals=residuals,
    )


def truncated_u_solve(system: JordanSystem, n: int, xi0_plus, theta: Optional[float] = None,
                      settings: Optional[PerronSettings] = None) -> SolveResult:
    """
    Lower-triangular form only: iterate on the u-component alone,
    u = [L (0, F(u))]_u + [T xi0_plus]_u, then rebuild the full state once.
    """
    if system.nonlinearity.form != NonlinearityForm.LOWER_TRIANGULAR:
        raise ParameterError("truncated_u_solve needs a lower-triangular nonlinearity")
    settings = settings or PerronSettings()
    theta = _resolve_theta(system, n, theta)
    times = half_line_grid(system, n, theta, settings)
    data = _check_support(system, n, xi0_plus)
    kernel = WeightedKernel(system.lams, system.pattern, theta, times)
    z_hom = kernel.homogeneous(data)
    decay = np.exp(-theta * times)[:, None]
    grow = np.exp(theta * times)[:, None]
    F = system.nonlinearity

    def forcing(u_weighted):
        state = np.zeros(z_hom.shape)
        state[:, 0, :] = decay * u_weighted
        g = np.zeros(z_hom.shape)
        g[:, -1, :] = grow * F(state)[:, -1, :]
        return g

    u = z_hom[:, 0, :].copy()
    diffs: List[float] = []
    residuals: List[float] = []
    for it in range(1, settings.max_iter + 1):
        u_new = kernel.apply(forcing(u))[:, 0, :] + z_hom[:, 0, :]
        diff = float(np.sqrt(trapezoid(np.sum((u_new - u) ** 2, axis=-1), times)))
        scale = max(float(np.sqrt(trapezoid(np.sum(u_new ** 2, axis=-1), times))), np.finfo(float).tiny)
        diffs.append(diff)
        residuals.append(diff / scale)
        u = u_new
        if diff <= settings.tol * scale:
            break
    else:
        raise NoContractionError(f"truncated_u_solve: no convergence after {settings.max_iter} iterations",
                                 rate=_contraction_rate(diffs, settings.noise_floor), iteration=settings.max_iter)
    z = kernel.apply(forcing(u)) + z_hom
    return SolveResult(
        trajectory=WeightedTrajectory(times=times, weighted=z, theta=theta),
        iterations=it, contraction_rate=_contraction_rate(diffs, settings.noise_floor * scale), residuals=residuals,
    )


# ============================================================
# Manifold graph
# ============================================================

class ManifoldGraph:
    """The Lipschitz graph M: P_n H -> Q_n H, evaluated on demand by Perron solves."""

    def __init__(self, system: JordanSystem, n: int, theta: Optional[float] = None,
                 settings: Optional[PerronSettings] = None):
        if not 1 <= n < system.N:
            raise ParameterError(f"gap index n={n} outside [1, {system.N - 1}]")
        self.system = system
        self.n = n
        self.theta = WeightParameter(theta=_resolve_theta(system, n, theta),
                                     lambda_n=system.ladder.values[n - 1], lambda_np1=system.ladder.values[n])
        self.settings = settings or PerronSettings()
        self.cache = SampleCache(name=f"manifold[n={n}]")
        self.last_result: Optional[SolveResult] = None

    @property
    def projector(self) -> SpectralProjector:
        return SpectralProjector(n=self.n, total=self.system.N)

    @property
    def base_dimension(self) -> int:
        return dimension_of_base(self.system.m, self.n)

    @property
    def operator_norm(self) -> float:
        return _contraction_norm(self.system, self.theta.theta)

    @property
    def lipschitz_bound(self) -> float:
        """l = L||L|| / (1 - L||L||), infinite when the gap condition fails."""
        q = self.system.nonlinearity.L * self.operator_norm
        return q / (1.0 - q) if q < 1.0 else float("inf")

    def solve(self, xi0_plus) -> SolveResult:
        result = solve_backward(self.system, self.n, xi0_plus, self.theta.theta, self.settings)
        self.last_result = result
        return result

    def base_point(self, xi) -> np.ndarray:
        arr = xi.components if isinstance(xi, StateVector) else np.asarray(xi)
        return project(arr, self.projector, "low")


def manifold_map(graph: ManifoldGraph, xi0_plus) -> np.ndarray:
    """M(xi0_plus) = Q_n xi*(0); cached per base point."""
    base = _check_support(graph.system, graph.n, xi0_plus)
    hit = graph.cache.get(base)
    if hit is not None:
        return np.array(hit)
    result = graph.solve(base)
    value = project(result.trajectory.weighted[-1], graph.projector, "high")
    graph.cache.set(base, value)
    return value


def random_base_points(graph: ManifoldGraph, count: int, rng: np.random.Generator, scale: float = 1.0) -> List[np.ndarray]:
    pts = []
    for _ in range(count):
        x = np.zeros((graph.system.m, graph.system.N))
        x[:, :graph.n] = scale * rng.standard_normal((graph.system.m, graph.n))
        pts.append(x)
    return pts


def sample_manifold(graph: ManifoldGraph, points: Sequence[np.ndarray], workers: Optional[int] = None) -> List[np.ndarray]:
    """Evaluate M on many base points; results keep the input order."""
    workers = workers or Settings.get_instance().workers
    if workers > 1 and len(points) > 1:
        with ThreadPoolExecutor(max_workers=min(workers, len(points))) as pool:
            return list(pool.map(lambda p: manifold_map(graph, p), points))
    return [manifold_map(graph, p) for p in points]


def lipschitz_sampling(graph: ManifoldGraph, points: Sequence[np.ndarray],
                       values: Optional[Sequence[np.ndarray]] = None) -> Tuple[float, int]:
    """Max ||M(a) - M(b)|| / ||a - b|| over all pairs of sample points, and the pair count."""
    values = values if values is not None else sample_manifold(graph, points)
    best = 0.0
    pairs = 0
    for i in range(len(points)):
        for j in range(i + 1, len(points)):
            den = np.linalg.norm(points[i] - points[j])
            if den == 0.0:
                continue
            best = max(best, float(np.linalg.norm(values[i] - values[j]) / den))
            pairs += 1
    return best, pairs


def verify_invariance(graph: ManifoldGraph, xi0_plus, horizon: float, samples: int = 5,
                      dt: Optional[float] = None) -> InvarianceReport:
    """
    Start on the manifold at xi0_plus + M(xi0_plus), evolve forward and measure
    ||Q_n xi(tau) - M(P_n xi(tau))|| at evenly spaced sample times.
    """
    base = _check_support(graph.system, graph.n, xi0_plus)
    xi0 = base + manifold_map(graph, base)
    traj = evolve(graph.system, xi0, (0.0, horizon), dt=dt)
    taus = np.linspace(0.0, horizon, samples + 1)[1:]
    defects = []
    for tau in taus:
        j = int(np.argmin(np.abs(traj.times - tau)))
        state = traj.states[j]
        low = project(state, graph.projector, "low")
        high = project(state, graph.projector, "high")
        defects.append(float(np.linalg.norm(high - manifold_map(graph, low))))
    report = InvarianceReport(
        sample_times=[float(traj.times[int(np.argmin(np.abs(traj.times - t)))]) for t in taus],
        defects=defects, max_defect=max(defects), horizon=horizon,
    )
    logger.info(f"verify_invariance: max defect {report.max_defect:.3e} over horizon {horizon:g}")
    return report


# ============================================================
# Exponential tracking
# ============================================================

def tracking_trace(system: JordanSystem, n: int, theta: Optional[float], xi: Trajectory,
                   settings: Optional[PerronSettings] = None) -> Tuple[WeightedTrajectory, TrackingReport]:
    """
    Manifold trace xi_bar = phi xi + xi_tilde of a forward solution xi on [0, T+].

    xi_tilde solves xi_tilde = L Phi(xi_tilde) on [-T, T+] with
    Phi(xi_tilde) = F(phi xi + xi_tilde) - phi F(xi) - phi' xi, so that xi_bar solves
    the system; for t <= 0 it reduces to F(xi_tilde). The report fits
    log||xi - xi_bar|| against t on [1, T+ - 1/(theta - lambda_n)].
    """
    settings = settings or PerronSettings()
    theta = _resolve_theta(system, n, theta)
    lam_n, lam_np1 = system.ladder.pair(n)
    h = xi.dt
    T = settings.T if settings.T is not None else default_horizon(theta, lam_n, lam_np1, settings.tail)
    back = int(math.ceil(T / h - 1e-9))
    t_plus = float(xi.times[-1])
    times = np.concatenate([xi.times[0] - h * np.arange(back, 0, -1), xi.times])

    fwd = np.zeros((times.size, system.m, system.N))
    fwd[back:] = xi.states
    phi, dphi = smoothstep(times - xi.times[0])
    phi_ = phi[:, None, None]
    F = system.nonlinearity
    base_state = phi_ * fwd
    # Phi(0) = F(phi xi) - phi F(xi) - phi' xi; equals F(0) before the cutoff
    offset = F(base_state) - phi_ * F(fwd) - dphi[:, None, None] * fwd

    kernel = WeightedKernel(system.lams, system.pattern, theta, times)
    decay = np.exp(-theta * times)[:, None, None]
    grow = np.exp(theta * times)[:, None, None]

    def weighted_rhs(z):
        with np.errstate(over="ignore", invalid="ignore"):
            return grow * (F.difference(base_state, decay * z) + offset)

    component = 0 if F.form == NonlinearityForm.LOWER_TRIANGULAR else None
    z0 = np.zeros_like(fwd)
    z, iters, rate, _ = _fixed_point(kernel, weighted_rhs, z0, z0, settings, component, "tracking_trace")

    xi_tilde = decay * z
    trace = WeightedTrajectory(times=times, weighted=grow * (base_state + xi_tilde), theta=theta)

    # xi - xi_bar = (1 - phi) xi - xi_tilde
    diff = (1.0 - phi_) * fwd - xi_tilde
    dnorm = np.sqrt(np.sum(diff ** 2, axis=(-2, -1)))
    end_zone = 1.0 / (theta - lam_n)
    t_hi = max(1.5, t_plus - end_zone)
    fwd_mask = (times >= 0.0) & (times <= t_hi)
    constant = float(np.max(np.exp(theta * times[fwd_mask]) * dnorm[fwd_mask]))

    scale = float(np.max(np.sqrt(np.sum(xi.states ** 2, axis=(-2, -1)))))
    floor = 1e-13 * max(scale, np.finfo(float).tiny)
    window = (times >= 1.0) & (times <= t_hi) & (dnorm > floor)
    at_floor = int(np.sum(window)) < 2
    if at_floor:
        fitted, residuals = float("inf"), []
    else:
        tw = times[window]
        lw = np.log(dnorm[window])
        slope, intercept = np.polyfit(tw, lw, 1)
        fitted = float(-slope)
        res = lw - (slope * tw + intercept)
        picks = np.linspace(0, res.size - 1, min(20, res.size)).astype(int)
        residuals = [float(r) for r in res[picks]]

    report = TrackingReport(
        theta=theta, fitted_rate=fitted, constant=constant, fit_window=(1.0, float(t_hi)),
        residuals=residuals, iterations=iters, contraction_rate=rate, at_noise_floor=at_floor,
    )
    logger.info(f"tracking_trace: fitted rate {fitted:.4g} vs theta {theta:.4g} ({iters} iterations)")
    return trace, report


# ============================================================
# Discrete operator norm
# ============================================================

def discrete_norm_L(system: JordanSystem, n: int, theta: Optional[float] = None, points: int = 400,
                    T: Optional[float] = None, iterations: int = 500,
                    rng: Optional[np.random.Generator] = None, tol: float = 1e-12) -> float:
    """
    Power-iteration estimate of the norm of the discrete half-line solution
    operator in the trapezoid-weighted L^2 norm, max over modes.
    """
    theta = _resolve_theta(system, n, theta)
    lam_n, lam_np1 = system.ladder.pair(n)
    T = T if T is not None else default_horizon(theta, lam_n, lam_np1)
    times = np.linspace(-T, 0.0, points + 1)
    kernel = WeightedKernel(system.lams, system.pattern, theta, times)
    rng = rng or np.random.default_rng(0)
    m = system.m
    size = (points + 1) * m
    w = np.full(points + 1, times[1] - times[0])
    w[0] *= 0.5
    w[-1] *= 0.5
    sw = np.sqrt(np.repeat(w, m))

    best = 0.0
    for k in range(system.N):
        basis = np.eye(size).reshape(size, points + 1, m)
        G = kernel.apply_mode(k, basis).reshape(size, size).T
        S = (sw[:, None] * G) / sw[None, :]
        x = rng.standard_normal(size)
        x /= np.linalg.norm(x)
        sigma = 0.0
        for _ in range(iterations):
            y = S.T @ (S @ x)
            ny = np.linalg.norm(y)
            if ny == 0.0:
                break
            x = y / ny
            new_sigma = float(np.linalg.norm(S @ x))
            if abs(new_sigma - sigma) <= tol * new_sigma:
                sigma = new_sigma
                break
            sigma = new_sigma
        best = max(best, sigma)
    return best
