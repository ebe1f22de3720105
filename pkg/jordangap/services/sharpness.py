"""
Two-mode counterexamples showing the Jordan gap thresholds are sharp.

On modes {n, n+1} the linear operator A - F_bar merges the eigenvalues
mu_n^+ and mu_{n+1}^-; a small extra term rotates the merged pair into a
complex pair, so trajectories in that plane spiral and their P_n component
has infinitely many zeros. A Lipschitz graph over P_n H cannot contain them.

Coordinates of the 4x4 matrices are (u_n, v_n, u_{n+1}, v_{n+1}).
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np
import pandas as pd
from scipy.linalg import block_diag, expm

from jordangap.errors import DegenerateGapError, InconclusiveError, JordanGapError, ParameterError
from jordangap.schemas.models import (
    GapConditionKind,
    GapKind,
    GapViolationReport,
    GapViolationRow,
    NormMode,
    OscillationReport,
)
from jordangap.services import gapcheck, linop
from jordangap.services.dynamics import JORDAN_2, Trajectory
from jordangap.services.spectra import EigenvalueLadder

logger = logging.getLogger("jordangap.sharpness")

COMPLEX_PAIR_RTOL = 1e-8
DEFAULT_EPSILON_FACTOR = 1e-2
STEPS_PER_PERIOD = 400


def coupling_constant(lambda_n: float, lambda_np1: float, mode: Union[NormMode, str]) -> float:
    """K: the sharp threshold itself (reciprocal of the solution-operator norm)."""
    mode = NormMode(mode)
    if mode == NormMode.FULL:
        return 1.0 / linop.norm_L_full(lambda_n, lambda_np1).norm
    return 1.0 / linop.norm_L_truncated(lambda_n, lambda_np1).norm


def default_epsilon(lambda_n: float, lambda_np1: float) -> float:
    return DEFAULT_EPSILON_FACTOR * math.sqrt(lambda_n * lambda_np1)


def _unit_eigvec(vec: np.ndarray) -> np.ndarray:
    """Unit norm, first nonzero component positive."""
    vec = np.asarray(vec, dtype=float)
    vec = vec / np.linalg.norm(vec)
    nz = np.flatnonzero(np.abs(vec) > 1e-300)
    if nz.size and vec[nz[0]] < 0.0:
        vec = -vec
    return vec


def _block(lam: float, K: float, mode: NormMode) -> np.ndarray:
    if mode == NormMode.FULL:
        return np.array([[lam, lam + K], [K, lam]])
    return np.array([[lam, lam], [K, lam]])


def _block_eig(lam: float, K: float, mode: NormMode) -> Tuple[Tuple[float, float], np.ndarray]:
    """Closed-form (mu^-, mu^+) of one block and its eigenvectors as columns (minus, plus)."""
    if mode == NormMode.FULL:
        r = math.sqrt(K * (lam + K))
        top = math.sqrt(lam + K)
    else:
        r = math.sqrt(K * lam)
        top = math.sqrt(lam)
    s = math.sqrt(K)
    minus = _unit_eigvec([top, -s])
    plus = _unit_eigvec([top, s])
    return (lam - r, lam + r), np.column_stack([minus, plus])


@dataclass
class CounterexampleInstance:
    lambda_n: float
    lambda_np1: float
    K: float
    epsilon: float
    mode: NormMode
    coupled_matrix: np.ndarray           # A - F on the two modes (4x4)
    eigenvalues: np.ndarray              # numeric, sorted by (real, imag)
    eigenvectors: np.ndarray             # epsilon = 0 basis: e_n^-, e_n^+, e_{n+1}^-, e_{n+1}^+ (columns)
    closed_form_eigenvalues: np.ndarray  # mu_n^-, mu_n^+, mu_{n+1}^-, mu_{n+1}^+ at epsilon = 0
    n: int = 1

    @property
    def linear_part(self) -> np.ndarray:
        """blockdiag(lambda_n J, lambda_{n+1} J)."""
        return block_diag(self.lambda_n * JORDAN_2, self.lambda_np1 * JORDAN_2)

    @property
    def perturbation(self) -> np.ndarray:
        """The assembled linear nonlinearity F = A - coupled_matrix."""
        return self.linear_part - self.coupled_matrix

    @property
    def nonlinearity_norm(self) -> float:
        return float(np.linalg.norm(self.perturbation, 2))

    @property
    def merged_value(self) -> float:
        return float(0.5 * (self.closed_form_eigenvalues[1] + self.closed_form_eigenvalues[2]))

    def complex_pair(self) -> Optional[complex]:
        """The eigenvalue with the largest positive imaginary part above the noise threshold."""
        ev = self.eigenvalues
        mask = np.abs(ev.imag) > COMPLEX_PAIR_RTOL * np.abs(ev)
        if not np.any(mask & (ev.imag > 0.0)):
            return None
        cand = ev[mask & (ev.imag > 0.0)]
        return complex(cand[np.argmax(cand.imag)])

    def to_report(self) -> Dict[str, Any]:
        pair = self.complex_pair()
        return {
            "lambda_n": self.lambda_n,
            "lambda_np1": self.lambda_np1,
            "mode": self.mode.value,
            "K": self.K,
            "epsilon": self.epsilon,
            "eigenvalues": [[float(z.real), float(z.imag)] for z in self.eigenvalues],
            "closed_form_eigenvalues": [float(z) for z in self.closed_form_eigenvalues],
            "nonlinearity_norm": self.nonlinearity_norm,
            "omega": abs(pair.imag) if pair is not None else 0.0,
        }


def _sorted_eigenvalues(M: np.ndarray) -> np.ndarray:
    ev = np.linalg.eigvals(M)
    order = np.lexsort((ev.imag, ev.real))
    return ev[order]


def build_counterexample(lambda_n: float, lambda_np1: float, epsilon: Optional[float] = None,
                         mode: Union[NormMode, str] = NormMode.FULL, K: Optional[float] = None,
                         n: int = 1) -> CounterexampleInstance:
    """
    Assemble A - F_bar blockwise and couple the two blocks with epsilon.

    Full mode adds the skew generator epsilon (e_{n+1}^- e_n^+T - e_n^+ e_{n+1}^-T)
    written in the epsilon = 0 eigenbasis; truncated mode adds epsilon at the
    (v_n, u_{n+1}) and (v_{n+1}, u_n) entries. K defaults to its closed form.
    """
    mode = NormMode(mode)
    if not lambda_np1 > lambda_n:
        raise DegenerateGapError(f"counterexample needs lambda_n < lambda_np1 (got {lambda_n!r}, {lambda_np1!r})",
                                 check="build_counterexample")
    if not lambda_n > 0.0:
        raise ParameterError(f"lambda_n must be positive (got {lambda_n!r})", check="build_counterexample")
    K = coupling_constant(lambda_n, lambda_np1, mode) if K is None else float(K)
    eps = default_epsilon(lambda_n, lambda_np1) if epsilon is None else float(epsilon)

    (mn_m, mn_p), Vn = _block_eig(lambda_n, K, mode)
    (mm_m, mm_p), Vm = _block_eig(lambda_np1, K, mode)
    V = block_diag(Vn, Vm)
    C0 = block_diag(_block(lambda_n, K, mode), _block(lambda_np1, K, mode))

    if mode == NormMode.FULL:
        G = np.zeros((4, 4))
        a, b = 1, 2  # e_n^+, e_{n+1}^-
        G[a, b] = -eps
        G[b, a] = eps
        C = C0 + V @ G @ np.linalg.inv(V)
    else:
        C = C0.copy()
        C[1, 2] += eps
        C[3, 0] += eps

    inst = CounterexampleInstance(
        lambda_n=float(lambda_n), lambda_np1=float(lambda_np1), K=K, epsilon=eps, mode=mode,
        coupled_matrix=C, eigenvalues=_sorted_eigenvalues(C), eigenvectors=V,
        closed_form_eigenvalues=np.array([mn_m, mn_p, mm_m, mm_p]), n=n,
    )
    logger.debug(f"build_counterexample {mode.value}: K={K:.12g} eps={eps:.3g} ||F||={inst.nonlinearity_norm:.6g}")
    return inst


def eigenvalue_closed_forms(inst: CounterexampleInstance) -> np.ndarray:
    """mu_k^+- = lambda_k +- sqrt(K (lambda_k + K)) (full) or lambda_k +- sqrt(K lambda_k) (truncated)."""
    return inst.closed_form_eigenvalues.copy()


def characteristic_polynomial_check(inst: CounterexampleInstance, samples: int = 5) -> float:
    """
    Fit det(C - (y + sqrt(l_n l_{n+1})) I) by a quartic through sample points and
    return the max abs deviation from (1, -2K, -4 sqrt(l_n l_{n+1}) K, 0, -eps^2 l_n l_{n+1}).
    """
    if inst.mode != NormMode.TRUNCATED:
        raise ParameterError("characteristic_polynomial_check applies to the truncated counterexample")
    s = math.sqrt(inst.lambda_n * inst.lambda_np1)
    ys = s * np.linspace(-1.0, 1.0, samples)
    eye = np.eye(4)
    dets = np.array([np.linalg.det(inst.coupled_matrix - (y + s) * eye) for y in ys])
    fitted = np.polyfit(ys, dets, 4)
    expected = np.array([1.0, -2.0 * inst.K, -4.0 * s * inst.K, 0.0, -inst.epsilon ** 2 * inst.lambda_n * inst.lambda_np1])
    return float(np.max(np.abs(fitted - expected)))


# ============================================================
# Oscillation in the complex-pair plane
# ============================================================

@dataclass
class PlaneRun:
    """Shifted trajectory zeta(t) = e^{mu t} xi(t) started in the complex-pair plane."""

    times: np.ndarray
    states: np.ndarray       # (M+1, 4)
    coordinates: np.ndarray  # (M+1, 4) in the epsilon = 0 eigenbasis
    basis_inverse: np.ndarray
    mu: float
    omega: float


def _plane_projector(C: np.ndarray, pair: complex) -> Tuple[np.ndarray, np.ndarray]:
    ev, W = np.linalg.eig(C)
    idx = np.argsort(np.abs(ev - pair))[:1]
    conj = np.argsort(np.abs(ev - np.conj(pair)))[:1]
    sel = np.concatenate([idx, conj])
    Winv = np.linalg.inv(W)
    proj = np.real(W[:, sel] @ Winv[sel, :])
    return proj, W[:, idx[0]]


def simulate_plane(inst: CounterexampleInstance, periods: float = 3.0,
                   steps_per_period: int = STEPS_PER_PERIOD) -> PlaneRun:
    """
    Integrate d/dt xi = -C xi from data in the complex-pair plane.

    Runs in the frame shifted by the real part mu of the pair (same signs as xi)
    and re-projects onto the plane each step to keep the other modes at zero.
    """
    pair = inst.complex_pair()
    if pair is None:
        raise InconclusiveError(
            f"no complex pair above |Im| > {COMPLEX_PAIR_RTOL:g}|mu| (epsilon={inst.epsilon:g})",
            check="oscillation_demo",
        )
    mu, omega = pair.real, pair.imag
    proj, vec = _plane_projector(inst.coupled_matrix, pair)
    Vinv = np.linalg.inv(inst.eigenvectors)
    # phase so the e_n^+ coordinate of the data is real and maximal
    w_a = (Vinv @ vec)[1]
    z = vec * np.conj(w_a) / abs(w_a)
    xi0 = proj @ np.real(z)
    xi0 = xi0 / np.linalg.norm(xi0)

    steps = max(8, int(math.ceil(periods * steps_per_period)))
    horizon = periods * 2.0 * math.pi / omega
    times = np.linspace(0.0, horizon, steps + 1)
    step = expm(-(inst.coupled_matrix - mu * np.eye(4)) * (times[1] - times[0]))
    states = np.empty((times.size, 4))
    states[0] = xi0
    x = xi0
    for j in range(steps):
        x = proj @ (step @ x)
        states[j + 1] = x
    return PlaneRun(times=times, states=states, coordinates=states @ Vinv.T, basis_inverse=Vinv, mu=mu, omega=omega)


def count_sign_changes(x: np.ndarray, floor: float = 0.0) -> int:
    s = np.sign(np.where(np.abs(x) > floor, x, 0.0))
    s = s[s != 0.0]
    return int(np.sum(s[1:] != s[:-1]))


def oscillation_demo(inst: CounterexampleInstance, periods: float = 3.0) -> OscillationReport:
    """Count zeros of the e_n^+ coordinate x(t) along a spiral over `periods` rotations."""
    run = simulate_plane(inst, periods)
    x = run.coordinates[:, 1]
    zeros = count_sign_changes(x, floor=1e-12 * float(np.max(np.abs(x))))

    # x(t) e^{mu t} = x0 cos(omega t) + y0 sin(omega t); the shift already removed e^{-mu t}
    x0 = x[0]
    dx0 = -(run.basis_inverse[1] @ ((inst.coupled_matrix - run.mu * np.eye(4)) @ run.states[0]))
    y0 = dx0 / run.omega
    closed = x0 * np.cos(run.omega * run.times) + y0 * np.sin(run.omega * run.times)
    error = float(np.max(np.abs(x - closed)))

    report = OscillationReport(
        omega=run.omega, mu=run.mu, zero_count=zeros, horizon=float(run.times[-1]),
        verdict=bool(run.omega != 0.0 and zeros >= 2), closed_form_error=error,
    )
    logger.info(f"oscillation_demo {inst.mode.value}: omega={run.omega:.6g} zeros={zeros} verdict={report.verdict}")
    return report


def spiral_frame(inst: CounterexampleInstance, periods: float = 3.0) -> pd.DataFrame:
    """Plot-ready spiral: t, x = e_n^+ and y = e_{n+1}^- coordinates, then the raw state columns."""
    run = simulate_plane(inst, periods)
    states = run.states.reshape(-1, 2, 2).transpose(0, 2, 1)
    frame = Trajectory(times=run.times, states=states, scheme="expm", mode_labels=[inst.n, inst.n + 1]).to_frame()
    frame.insert(1, "x", run.coordinates[:, 1])
    frame.insert(2, "y", run.coordinates[:, 2])
    return frame


# ============================================================
# Gap violation certificate
# ============================================================

_COUNTEREXAMPLE_MODE = {GapKind.JORDAN_FULL: NormMode.FULL, GapKind.JORDAN_TRUNCATED: NormMode.TRUNCATED}


def gap_violation_certificate(ladder: EigenvalueLadder, L: float,
                              kind: Union[GapConditionKind, GapKind, str],
                              beta: Optional[float] = None, max_halvings: int = 40) -> GapViolationReport:
    """
    Per-index strict violation lhs < L, plus the sup flag. For the jordan_full and
    jordan_truncated kinds each violated index gets an explicit counterexample
    with ||F|| < L (epsilon halved until it fits).
    """
    kind = gapcheck.as_kind(kind, beta)
    ce_mode = _COUNTEREXAMPLE_MODE.get(kind.kind)
    rows = []
    for n in range(1, ladder.N):
        lhs = gapcheck.gap_lhs(ladder, n, kind)
        violated = bool(lhs < L)
        norm = eps = None
        if violated and ce_mode is not None:
            a, b = ladder.pair(n)
            try:
                eps = default_epsilon(a, b)
                inst = build_counterexample(a, b, eps, ce_mode, n=n)
                for _ in range(max_halvings):
                    if inst.nonlinearity_norm < L:
                        break
                    eps *= 0.5
                    inst = build_counterexample(a, b, eps, ce_mode, n=n)
                if inst.nonlinearity_norm < L:
                    norm = inst.nonlinearity_norm
                else:
                    logger.warning(f"gap_violation_certificate: no epsilon gives ||F|| < L at n={n}")
                    eps = None
            except JordanGapError as e:
                logger.warning(f"gap_violation_certificate: n={n} skipped ({e.detail})")
                eps = None
        rows.append(GapViolationRow(n=n, lhs=lhs, violated=violated, counterexample_norm=norm, epsilon=eps))
    sup_lhs = max(r.lhs for r in rows)
    return GapViolationReport(kind=kind, L=L, rows=rows, sup_lhs=sup_lhs, sup_violated=bool(sup_lhs < L))
