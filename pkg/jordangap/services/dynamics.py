"""
Exact Jordan-block propagators and an exponential integrator for the
Galerkin system

    d/dt xi_k + lambda_k J xi_k = F(xi)_k,   k = 1..N,

where J is an upper-triangular 0/1 pattern with unit diagonal (m x m).
States are arrays of shape (m, N): component index first, mode index last.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from jordangap.errors import DivergenceError, ParameterError, ShapeError, SizeError
from jordangap.schemas.models import NonlinearityForm
from jordangap.services.spectra import EigenvalueLadder

logger = logging.getLogger("jordangap.dynamics")

JORDAN_2 = np.array([[1.0, 1.0], [0.0, 1.0]])
JORDAN_3 = np.array([[1.0, 1.0, 0.0], [0.0, 1.0, 1.0], [0.0, 0.0, 1.0]])
BURGERS_PATTERN = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 1.0], [0.0, 0.0, 1.0]])

SCHEME_ORDER = {"euler": 1, "midpoint": 2}

_SERIES_RADIUS = 1.0
_SERIES_TERMS = 30


def standard_pattern(m: int) -> np.ndarray:
    """Full Jordan pattern of size m (ones on the diagonal and superdiagonal)."""
    return np.eye(m) + np.eye(m, k=1)


def validate_pattern(pattern) -> np.ndarray:
    pat = np.asarray(pattern, dtype=float)
    if pat.ndim != 2 or pat.shape[0] != pat.shape[1]:
        raise ShapeError(f"block pattern must be square, got shape {pat.shape}")
    if not np.all(np.diag(pat) == 1.0):
        raise ParameterError("block pattern needs a unit diagonal")
    if np.any(np.tril(pat, -1) != 0.0):
        raise ParameterError("block pattern must be upper triangular")
    if np.any((pat != 0.0) & (pat != 1.0)):
        raise ParameterError("block pattern entries must be 0 or 1")
    return pat


# ============================================================
# Moments of exp(-tau B),  B = sigma I + rho N
# ============================================================

def _g_moments(z: np.ndarray, jmax: int) -> np.ndarray:
    """
    g_j(z) = int_0^1 s^j exp(-z s) ds for j = 0..jmax, any real z.

    Power series for |z| < 1, otherwise the upward recurrence
    g_j = (j g_{j-1} - e^{-z}) / z from g_0 = -expm1(-z)/z.
    """
    z = np.asarray(z, dtype=float)
    flat = z.reshape(-1)
    out = np.empty((flat.size, jmax + 1))
    small = np.abs(flat) < _SERIES_RADIUS

    if np.any(small):
        zs = flat[small]
        k = np.arange(_SERIES_TERMS)
        fact = np.array([math.factorial(i) for i in range(_SERIES_TERMS)], dtype=float)
        powers = (-zs[:, None]) ** k / fact
        for j in range(jmax + 1):
            out[small, j] = np.sum(powers / (j + k + 1), axis=-1)

    big = ~small
    if np.any(big):
        zb = flat[big]
        ez = np.exp(-zb)
        g = -np.expm1(-zb) / zb
        out[big, 0] = g
        for j in range(1, jmax + 1):
            g = (j * g - ez) / zb
            out[big, j] = g
    return out.reshape(z.shape + (jmax + 1,))


def nilpotent_powers(pattern: np.ndarray) -> np.ndarray:
    m = pattern.shape[0]
    nil = pattern - np.eye(m)
    powers = np.empty((m, m, m))
    powers[0] = np.eye(m)
    for j in range(1, m):
        powers[j] = powers[j - 1] @ nil
    return powers


def jordan_moments(sigma, rho, h: float, pattern) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Exact step matrices for B = sigma I + rho (J - I):

        E  = exp(-h B)
        I0 = int_0^h exp(-tau B) dtau
        I1 = int_0^h tau exp(-tau B) dtau

    sigma and rho broadcast together; results have shape sigma.shape + (m, m).
    Valid for either sign of sigma and h.
    """
    pat = validate_pattern(pattern)
    m = pat.shape[0]
    powers = nilpotent_powers(pat)
    sigma, rho = np.broadcast_arrays(np.asarray(sigma, dtype=float), np.asarray(rho, dtype=float))
    z = sigma * h
    g = _g_moments(z, m)

    coef_e = np.empty(sigma.shape + (m,))
    coef_0 = np.empty(sigma.shape + (m,))
    coef_1 = np.empty(sigma.shape + (m,))
    decay = np.exp(-z)
    for j in range(m):
        c = (-rho) ** j / math.factorial(j)
        coef_e[..., j] = decay * c * h ** j
        coef_0[..., j] = c * h ** (j + 1) * g[..., j]
        coef_1[..., j] = c * h ** (j + 2) * g[..., j + 1]

    E = np.einsum("...j,jab->...ab", coef_e, powers)
    I0 = np.einsum("...j,jab->...ab", coef_0, powers)
    I1 = np.einsum("...j,jab->...ab", coef_1, powers)
    return E, I0, I1


def block_propagator(lam: float, t: float, m: int = 2, pattern=None) -> np.ndarray:
    """exp(-t lam J) for the m x m pattern J (standard Jordan pattern by default)."""
    if lam < 0.0:
        raise ParameterError(f"block_propagator needs lambda >= 0 (got {lam!r})")
    pat = standard_pattern(m) if pattern is None else validate_pattern(pattern)
    E, _, _ = jordan_moments(lam, lam, t, pat)
    return E


def propagator_bound(ladder: EigenvalueLadder, t: float, m: int = 2, pattern=None) -> float:
    """sup_k ||exp(-t lambda_k J)||_2 over the ladder."""
    pat = standard_pattern(m) if pattern is None else validate_pattern(pattern)
    lam = ladder.array()
    E, _, _ = jordan_moments(lam, lam, t, pat)
    return float(np.max(np.linalg.norm(E, ord=2, axis=(-2, -1))))


# ============================================================
# States and nonlinearities
# ============================================================

@dataclass
class StateVector:
    """m coefficient vectors of length N (xi = (u, v) for m = 2)."""

    components: np.ndarray

    def __post_init__(self):
        self.components = np.asarray(self.components)
        if self.components.ndim != 2:
            raise ShapeError(f"state must have shape (m, N), got {self.components.shape}")

    @classmethod
    def from_components(cls, *parts) -> "StateVector":
        lengths = {len(p) for p in parts}
        if len(lengths) != 1:
            raise ShapeError(f"components have different lengths: {sorted(lengths)}")
        return cls(np.vstack([np.asarray(p) for p in parts]))

    @property
    def m(self) -> int:
        return self.components.shape[0]

    @property
    def N(self) -> int:
        return self.components.shape[1]

    @property
    def u(self) -> np.ndarray:
        return self.components[0]

    @property
    def v(self) -> np.ndarray:
        return self.components[-1]

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.components) ** 2)))

    def __add__(self, other: "StateVector") -> "StateVector":
        return StateVector(self.components + other.components)

    def __sub__(self, other: "StateVector") -> "StateVector":
        return StateVector(self.components - other.components)


def _as_array(xi) -> np.ndarray:
    return xi.components if isinstance(xi, StateVector) else np.asarray(xi)


def _tanh_increment(x: np.ndarray, d: np.ndarray) -> np.ndarray:
    """tanh(x + d) - tanh(x) = tanh(d) sech^2(x) / (1 + tanh(x) tanh(d))."""
    with np.errstate(over="ignore"):
        sech2 = 1.0 / np.cosh(x) ** 2
    td = np.tanh(d)
    return td * sech2 / (1.0 + np.tanh(x) * td)


@dataclass
class NonlinearitySpec:
    """
    Nonlinearity F with Lipschitz constant L.

    The evaluator acts on the last two axes (m, N) of its argument and must
    broadcast over any leading axes; perron evaluates whole trajectories at once.
    For the lower-triangular form only the last component of the output is
    nonzero and it depends on the first component only.
    """

    L: float
    evaluator: Callable[[np.ndarray], np.ndarray]
    form: NonlinearityForm = NonlinearityForm.GENERAL
    name: str = "custom"
    difference_evaluator: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None

    def __call__(self, xi) -> np.ndarray:
        return self.evaluator(_as_array(xi))

    def difference(self, x, d) -> np.ndarray:
        """F(x + d) - F(x), without cancellation when the factory supplies a closed form."""
        x, d = _as_array(x), _as_array(d)
        if self.difference_evaluator is not None:
            return self.difference_evaluator(x, d)
        return self.evaluator(x + d) - self.evaluator(x)

    @property
    def is_zero(self) -> bool:
        return self.name == "zero"

    # --- factories ---

    @classmethod
    def zero(cls, form: NonlinearityForm = NonlinearityForm.GENERAL) -> "NonlinearitySpec":
        return cls(L=0.0, evaluator=lambda x: np.zeros_like(x), form=NonlinearityForm(form), name="zero",
                   difference_evaluator=lambda x, d: np.zeros_like(d))

    @classmethod
    def linear(cls, B: np.ndarray, m: int, N: int) -> "NonlinearitySpec":
        """F(xi) = B vec(xi) with B of size (mN x mN)."""
        B = np.asarray(B, dtype=float)
        if B.shape != (m * N, m * N):
            raise ShapeError(f"linear nonlinearity needs B of shape {(m * N, m * N)}, got {B.shape}")

        def evaluate(x):
            flat = x.reshape(x.shape[:-2] + (m * N,))
            return np.einsum("ij,...j->...i", B, flat).reshape(x.shape)

        return cls(L=float(np.linalg.norm(B, 2)), evaluator=evaluate, name="linear",
                   difference_evaluator=lambda x, d: evaluate(d))

    @classmethod
    def saturating(cls, L: float, m: int, N: int, rng: np.random.Generator,
                   form: NonlinearityForm = NonlinearityForm.GENERAL,
                   W: Optional[np.ndarray] = None) -> "NonlinearitySpec":
        """
        L * W tanh(.) with ||W||_2 = 1, so the Lipschitz constant is at most L.
        General form mixes all mN coordinates; lower-triangular form maps u to
        the last component.
        """
        form = NonlinearityForm(form)
        size = m * N if form == NonlinearityForm.GENERAL else N
        if W is None:
            W = rng.standard_normal((size, size))
        W = np.asarray(W, dtype=float)
        W = W / np.linalg.norm(W, 2)

        if form == NonlinearityForm.GENERAL:
            def mix(t):
                flat = t.reshape(t.shape[:-2] + (m * N,))
                return L * np.einsum("ij,...j->...i", W, flat).reshape(t.shape)

            def evaluate(x):
                return mix(np.tanh(x))

            def difference(x, d):
                return mix(_tanh_increment(x, d))
        else:
            def evaluate(x):
                out = np.zeros_like(x)
                out[..., -1, :] = L * np.einsum("ij,...j->...i", W, np.tanh(x[..., 0, :]))
                return out

            def difference(x, d):
                x, d = np.broadcast_arrays(x, d)
                out = np.zeros_like(d)
                inc = _tanh_increment(x[..., 0, :], d[..., 0, :])
                out[..., -1, :] = L * np.einsum("ij,...j->...i", W, inc)
                return out

        return cls(L=float(L), evaluator=evaluate, form=form, name="saturating",
                   difference_evaluator=difference)

    @classmethod
    def calibrated(cls, L: float, m: int, N: int, rng: np.random.Generator,
                   form: NonlinearityForm = NonlinearityForm.GENERAL, scale: float = 1.0,
                   samples: int = 200) -> "NonlinearitySpec":
        """
        Saturating nonlinearity whose amplitude is chosen so that the sampled
        Lipschitz ratio (empirical_lipschitz at this scale) equals L.

        The returned spec carries the measured L; the global bound of the
        saturating form is the amplitude, which is larger.
        """
        form = NonlinearityForm(form)
        size = m * N if form == NonlinearityForm.GENERAL else N
        W = rng.standard_normal((size, size))
        unit = cls.saturating(1.0, m, N, rng, form=form, W=W)
        measured = empirical_lipschitz(unit, m, N, rng, samples=samples, scale=scale)
        if not measured > 0.0:
            raise ParameterError("cannot calibrate a nonlinearity with zero sampled Lipschitz ratio")
        amplitude = L / measured
        spec = cls.saturating(amplitude, m, N, rng, form=form, W=W)
        logger.debug(f"calibrated {form.value} nonlinearity: amplitude {amplitude:.4g} for measured L={L:g}")
        return replace(spec, L=float(L), name="calibrated")

    @classmethod
    def lower_triangular(cls, F: Callable[[np.ndarray], np.ndarray], L: float, name: str = "lower_triangular") -> "NonlinearitySpec":
        """Wrap a map u -> F(u) (acting on the last axis) as xi -> (0, ..., 0, F(u))."""
        def evaluate(x):
            out = np.zeros_like(x)
            out[..., -1, :] = F(x[..., 0, :])
            return out

        return cls(L=float(L), evaluator=evaluate, form=NonlinearityForm.LOWER_TRIANGULAR, name=name)

    @classmethod
    def constant(cls, c: float, mode: int, N: int) -> "NonlinearitySpec":
        """Lower-triangular F(u) = c e_mode (mode is 1-based)."""
        vec = np.zeros(N)
        vec[mode - 1] = c
        return cls.lower_triangular(lambda u: np.broadcast_to(vec, u.shape).copy(), L=0.0, name="constant")


def empirical_lipschitz(spec: NonlinearitySpec, m: int, N: int, rng: np.random.Generator,
                        samples: int = 200, scale: float = 1.0) -> float:
    """Max of ||F(x) - F(y)|| / ||x - y|| over random pairs."""
    x = scale * rng.standard_normal((samples, m, N))
    y = scale * rng.standard_normal((samples, m, N))
    num = np.sqrt(np.sum((spec(x) - spec(y)) ** 2, axis=(-2, -1)))
    den = np.sqrt(np.sum((x - y) ** 2, axis=(-2, -1)))
    return float(np.max(num / den))


@dataclass
class JordanSystem:
    """d/dt xi + (J kron A) xi = F(xi) on the first N modes of the ladder."""

    ladder: EigenvalueLadder
    nonlinearity: NonlinearitySpec
    pattern: np.ndarray = field(default_factory=lambda: JORDAN_2.copy())

    def __post_init__(self):
        self.pattern = validate_pattern(self.pattern)

    @property
    def m(self) -> int:
        return self.pattern.shape[0]

    @property
    def N(self) -> int:
        return self.ladder.N

    @property
    def lams(self) -> np.ndarray:
        return self.ladder.array()

    def state(self, components) -> StateVector:
        sv = StateVector(components)
        if sv.components.shape != (self.m, self.N):
            raise ShapeError(f"expected state shape {(self.m, self.N)}, got {sv.components.shape}")
        return sv


# ============================================================
# Trajectories
# ============================================================

@dataclass
class Trajectory:
    """States on a uniform time grid, shape (M+1, m, N)."""

    times: np.ndarray
    states: np.ndarray
    scheme: str = "exact"
    order: int = 0
    mode_labels: Optional[Sequence] = None

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0]) if self.times.size > 1 else 0.0

    def __len__(self) -> int:
        return self.times.size

    def state(self, j: int) -> StateVector:
        return StateVector(self.states[j])

    def final(self) -> StateVector:
        return self.state(-1)

    def to_frame(self) -> pd.DataFrame:
        """Columns: t, then one column per (component, mode); complex data split into .re/.im."""
        M1, m, N = self.states.shape
        labels = list(self.mode_labels) if self.mode_labels is not None else list(range(1, N + 1))
        data = {"t": self.times}
        complex_data = np.iscomplexobj(self.states)
        for c in range(m):
            for i, k in enumerate(labels):
                col = f"c{c}_k{k}"
                if complex_data:
                    data[f"{col}.re"] = self.states[:, c, i].real
                    data[f"{col}.im"] = self.states[:, c, i].imag
                else:
                    data[col] = self.states[:, c, i]
        return pd.DataFrame(data)


def uniform_grid(t_span: Tuple[float, float], dt: float) -> np.ndarray:
    t0, t1 = float(t_span[0]), float(t_span[1])
    if not dt > 0.0:
        raise ParameterError(f"dt must be positive (got {dt!r})")
    if not t1 > t0:
        raise ParameterError(f"t_span must be forward oriented (got {t_span!r})")
    steps = max(1, int(math.ceil((t1 - t0) / dt - 1e-9)))
    return np.linspace(t0, t1, steps + 1)


def exponential_integrate(
    lams: np.ndarray,
    pattern,
    rhs: Callable[[float, np.ndarray], np.ndarray],
    xi0: np.ndarray,
    times: np.ndarray,
    scheme: str = "midpoint",
    check: str = "evolve",
) -> Trajectory:
    """
    Integrate d/dt xi_k + lams_k J xi_k = rhs(t, xi)_k on a uniform grid.

    The linear part is exact per mode. 'euler' freezes rhs over the step
    (order 1); 'midpoint' evaluates rhs at an exponential half step (order 2).
    """
    if scheme not in SCHEME_ORDER:
        raise ParameterError(f"unknown scheme {scheme!r}; choose from {sorted(SCHEME_ORDER)}")
    pat = validate_pattern(pattern)
    lams = np.asarray(lams, dtype=float)
    xi = np.array(xi0, copy=True)
    if xi.shape != (pat.shape[0], lams.size):
        raise ShapeError(f"initial state shape {xi.shape} does not match {(pat.shape[0], lams.size)}")
    if times.size < 2:
        raise SizeError("time grid needs at least two points")

    h = float(times[1] - times[0])
    E, I0, _ = jordan_moments(lams, lams, h, pat)
    E_half, I0_half, _ = jordan_moments(lams, lams, 0.5 * h, pat)

    def step_apply(mat, x):
        return np.einsum("kab,bk->ak", mat, x)

    states = np.empty((times.size,) + xi.shape, dtype=np.result_type(xi, float))
    states[0] = xi
    with np.errstate(over="ignore", invalid="ignore"):
        for j in range(times.size - 1):
            t = times[j]
            r = rhs(t, xi)
            if scheme == "euler":
                nxt = step_apply(E, xi) + step_apply(I0, r)
            else:
                mid = step_apply(E_half, xi) + step_apply(I0_half, r)
                nxt = step_apply(E, xi) + step_apply(I0, rhs(t + 0.5 * h, mid))
            if not np.all(np.isfinite(nxt)):
                raise DivergenceError(
                    f"non-finite state at step {j + 1} (t={times[j + 1]:.6g})",
                    step=j + 1, time=float(times[j + 1]), check=check,
                )
            xi = nxt
            states[j + 1] = xi
    return Trajectory(times=times, states=states, scheme=scheme, order=SCHEME_ORDER[scheme])


def default_dt(ladder: EigenvalueLadder) -> float:
    return 0.1 / float(ladder.values[-1])


def evolve(system: JordanSystem, xi0, t_span: Tuple[float, float], dt: Optional[float] = None,
           scheme: str = "midpoint") -> Trajectory:
    """Forward solution of the Galerkin system from xi0 over t_span."""
    x0 = system.state(_as_array(xi0)).components.astype(float)
    times = uniform_grid(t_span, dt if dt is not None else default_dt(system.ladder))
    traj = exponential_integrate(
        system.lams, system.pattern, lambda t, x: system.nonlinearity(x), x0, times, scheme=scheme
    )
    logger.debug(f"evolve: {times.size - 1} {scheme} steps on [{times[0]:g}, {times[-1]:g}]")
    return traj


def second_order_residual(system: JordanSystem, trajectory: Trajectory) -> float:
    """
    Max over interior grid points of ||A^{-1} u'' + 2 u' + A u + F(u)||, the
    structurally damped wave form of the 2-Jordan system with lower-triangular
    nonlinearity. Centered second-order differences, endpoints dropped.
    """
    if system.m != 2:
        raise ParameterError("second_order_residual needs a 2-Jordan system")
    if system.nonlinearity.form != NonlinearityForm.LOWER_TRIANGULAR:
        raise ParameterError("second_order_residual needs a lower-triangular nonlinearity")
    if len(trajectory) < 3:
        raise SizeError("second_order_residual needs at least 3 grid points")

    h = trajectory.dt
    lam = system.lams
    u = trajectory.states[:, 0, :]
    forcing = system.nonlinearity(trajectory.states[1:-1])[:, -1, :]
    du = (u[2:] - u[:-2]) / (2.0 * h)
    ddu = (u[2:] - 2.0 * u[1:-1] + u[:-2]) / (h * h)
    res = ddu / lam + 2.0 * du + lam * u[1:-1] + forcing
    return float(np.max(np.sqrt(np.sum(np.abs(res) ** 2, axis=-1))))


def v_equation_residual(system: JordanSystem, trajectory: Trajectory) -> float:
    """Max interior residual of dv/dt + A v - F(u) (last component, 2-Jordan)."""
    if len(trajectory) < 3:
        raise SizeError("v_equation_residual needs at least 3 grid points")
    h = trajectory.dt
    v = trajectory.states[:, -1, :]
    forcing = system.nonlinearity(trajectory.states[1:-1])[:, -1, :]
    dv = (v[2:] - v[:-2]) / (2.0 * h)
    res = dv + system.lams * v[1:-1] - forcing
    return float(np.max(np.sqrt(np.sum(np.abs(res) ** 2, axis=-1))))
