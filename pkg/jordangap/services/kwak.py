"""
Kwak transforms on the periodic interval (-pi, pi).

Fields are truncated Fourier series u(x) = sum_{|k|<=N_f} c_k e^{ikx}; products
are formed on a zero-padded physical grid large enough to hold the polynomial
being evaluated, then truncated back to |k| <= N_f.

Two demonstrations:

- viscous Burgers  u_t = nu u_xx + (u^2)_x - f(u)  lifted to (u, v = u_x, w = u^2/nu),
  a 3-component system with pattern [[1,0,0],[0,1,1],[0,0,1]];
- scalar reaction-diffusion-advection  u_t + (1 - d_xx) u = f(u, u_x)  lifted to
  (u, v = (d_xx - 1)^{-1} f), a 2-Jordan system with nonlinearity (0, F(u)).
"""

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Dict, Optional, Tuple, Union

import numpy as np
import sympy
from scipy import fft

from jordangap.errors import ParameterError, ShapeError, SizeError
from jordangap.services.dynamics import (
    BURGERS_PATTERN,
    JORDAN_2,
    JORDAN_3,
    StateVector,
    Trajectory,
    exponential_integrate,
    uniform_grid,
)
from jordangap.services.spectra import EigenvalueLadder, fourier_eigenvalues

logger = logging.getLogger("jordangap.kwak")

MIN_MODES = 8
DEFAULT_DT = 1e-3
SCALAR = np.array([[1.0]])

_u, _ux, _uxx = sympy.symbols("u ux uxx")


# ============================================================
# Fourier fields
# ============================================================

def _wavenumbers(N_f: int) -> np.ndarray:
    return np.arange(-N_f, N_f + 1)


def _parity(N_f: int) -> np.ndarray:
    return np.where(_wavenumbers(N_f) % 2 == 0, 1.0, -1.0)


def dealias_size(N_f: int, degree: int = 2) -> int:
    """Grid size that makes a degree-d product alias-free on |k| <= N_f (2/3 rule for d = 2)."""
    return (max(int(degree), 2) + 1) * N_f + 1


def to_grid(coeffs: np.ndarray, P: int, real: bool = True) -> np.ndarray:
    """Values at x_j = -pi + 2 pi j / P; acts on the last axis."""
    coeffs = np.asarray(coeffs)
    N_f = (coeffs.shape[-1] - 1) // 2
    if P < 2 * N_f + 1:
        raise SizeError(f"grid of {P} points cannot hold |k| <= {N_f}")
    buf = np.zeros(coeffs.shape[:-1] + (P,), dtype=complex)
    buf[..., _wavenumbers(N_f) % P] = coeffs * _parity(N_f)
    values = P * fft.ifft(buf, axis=-1)
    return values.real if real else values


def from_grid(values: np.ndarray, N_f: int, real: bool = True) -> np.ndarray:
    P = values.shape[-1]
    spec = fft.fft(values, axis=-1) / P
    coeffs = spec[..., _wavenumbers(N_f) % P] * _parity(N_f)
    return symmetrize(coeffs) if real else coeffs


def symmetrize(coeffs: np.ndarray) -> np.ndarray:
    """Exact conjugate symmetry c_{-k} = conj(c_k)."""
    return 0.5 * (coeffs + np.conj(coeffs[..., ::-1]))


def reality_defect(coeffs: np.ndarray) -> float:
    return float(np.max(np.abs(coeffs - np.conj(coeffs[..., ::-1])), initial=0.0))


@dataclass
class FourierField:
    """Coefficients for k = -N_f..N_f; `real` marks conjugate-symmetric data."""

    coefficients: np.ndarray
    real: bool = True

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=complex)
        if c.ndim != 1 or c.size % 2 != 1:
            raise ShapeError(f"Fourier coefficients need odd length 2N_f+1, got shape {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ParameterError("Fourier coefficients must be finite")
        if self.real:
            scale = max(1.0, float(np.max(np.abs(c))))
            if reality_defect(c) > 1e-10 * scale:
                raise ParameterError("reality flag set but coefficients are not conjugate symmetric")
            c = symmetrize(c)
        self.coefficients = c

    # --- constructors ---

    @classmethod
    def zeros(cls, N_f: int) -> "FourierField":
        return cls(np.zeros(2 * N_f + 1, dtype=complex))

    @classmethod
    def from_physical(cls, values: np.ndarray, N_f: int, real: bool = True) -> "FourierField":
        return cls(from_grid(np.asarray(values), N_f, real), real=real)

    @classmethod
    def sine(cls, N_f: int, k: int = 1, amplitude: float = 1.0) -> "FourierField":
        c = np.zeros(2 * N_f + 1, dtype=complex)
        c[N_f + k] = -0.5j * amplitude
        c[N_f - k] = 0.5j * amplitude
        return cls(c)

    @classmethod
    def cosine(cls, N_f: int, k: int = 1, amplitude: float = 1.0) -> "FourierField":
        c = np.zeros(2 * N_f + 1, dtype=complex)
        c[N_f + k] += 0.5 * amplitude
        c[N_f - k] += 0.5 * amplitude
        return cls(c)

    @classmethod
    def random_smooth(cls, N_f: int, rng: np.random.Generator, decay: float = 4.0,
                      amplitude: float = 1.0, band: Optional[int] = None) -> "FourierField":
        """Random real field with |c_k| ~ amplitude (1 + |k|)^{-decay}, zero above `band`."""
        band = N_f if band is None else min(band, N_f)
        c = np.zeros(2 * N_f + 1, dtype=complex)
        ks = np.arange(1, band + 1)
        z = (rng.standard_normal(ks.size) + 1j * rng.standard_normal(ks.size)) / math.sqrt(2.0)
        c[N_f + ks] = amplitude * z * (1.0 + ks) ** (-decay)
        c[N_f - ks] = np.conj(c[N_f + ks])
        c[N_f] = amplitude * rng.standard_normal()
        return cls(c)

    # --- structure ---

    @property
    def N_f(self) -> int:
        return (self.coefficients.size - 1) // 2

    @property
    def k(self) -> np.ndarray:
        return _wavenumbers(self.N_f)

    @property
    def mean(self) -> complex:
        return complex(self.coefficients[self.N_f])

    def norm(self) -> float:
        """l^2 norm of the coefficients (L^2 norm up to sqrt(2 pi))."""
        return float(np.linalg.norm(self.coefficients))

    def resized(self, N_f: int) -> "FourierField":
        """Zero-pad or truncate to |k| <= N_f."""
        c = np.zeros(2 * N_f + 1, dtype=complex)
        keep = min(N_f, self.N_f)
        c[N_f - keep:N_f + keep + 1] = self.coefficients[self.N_f - keep:self.N_f + keep + 1]
        return FourierField(c, real=self.real)

    # --- calculus ---

    def derivative(self, order: int = 1) -> "FourierField":
        return FourierField(self.coefficients * (1j * self.k) ** order, real=self.real)

    def antiderivative(self) -> "FourierField":
        """Zero-mean antiderivative."""
        k = self.k.astype(float)
        with np.errstate(divide="ignore", invalid="ignore"):
            c = np.where(k != 0, self.coefficients / (1j * k), 0.0)
        return FourierField(c, real=self.real)

    def to_physical(self, P: Optional[int] = None) -> np.ndarray:
        return to_grid(self.coefficients, P or dealias_size(self.N_f), self.real)

    def grid(self, P: Optional[int] = None) -> np.ndarray:
        P = P or dealias_size(self.N_f)
        return -math.pi + 2.0 * math.pi * np.arange(P) / P

    def __add__(self, other: "FourierField") -> "FourierField":
        return FourierField(self.coefficients + other.coefficients, real=self.real and other.real)

    def __sub__(self, other: "FourierField") -> "FourierField":
        return FourierField(self.coefficients - other.coefficients, real=self.real and other.real)

    def scaled(self, c: float) -> "FourierField":
        return FourierField(c * self.coefficients, real=self.real)


def pseudo_product(a: FourierField, b: FourierField, P: Optional[int] = None) -> FourierField:
    """Truncated product a*b computed on a padded grid."""
    if a.N_f != b.N_f:
        raise ShapeError(f"fields have different sizes: {a.N_f} vs {b.N_f}")
    P = P or dealias_size(a.N_f, 2)
    real = a.real and b.real
    values = to_grid(a.coefficients, P, real) * to_grid(b.coefficients, P, real)
    return FourierField(from_grid(values, a.N_f, real), real=real)


def dealias_product_check(a: FourierField, b: FourierField) -> float:
    """Max coefficient difference between the 2/3-rule product and the product on a doubled grid."""
    P = dealias_size(a.N_f, 2)
    return float(np.max(np.abs(pseudo_product(a, b, P).coefficients - pseudo_product(a, b, 2 * P).coefficients)))


# ============================================================
# Nonlinearity expressions
# ============================================================

class NonlinearityExpression:
    """
    Polynomial f(u, ux) parsed from text, e.g. "-u**3 + 0.1*u*ux".

    Partials are symbolic; numeric versions come from sympy.lambdify and
    broadcast over numpy arrays.
    """

    def __init__(self, text: Union[str, "NonlinearityExpression", None]):
        text = "0" if text is None else text
        if isinstance(text, NonlinearityExpression):
            text = text.text
        self.text = str(text)
        try:
            expr = sympy.sympify(self.text, locals={"u": _u, "ux": _ux}, rational=False)
        except (sympy.SympifyError, SyntaxError, TypeError) as e:
            raise ParameterError(f"cannot parse nonlinearity {self.text!r}: {e}")
        extra = expr.free_symbols - {_u, _ux}
        if extra:
            raise ParameterError(f"nonlinearity {self.text!r} uses unknown symbols {sorted(map(str, extra))}")
        if not expr.is_polynomial(_u, _ux):
            raise ParameterError(f"nonlinearity {self.text!r} is not a polynomial in u, ux")
        self.expr = sympy.expand(expr)

    def __repr__(self) -> str:
        return f"NonlinearityExpression({self.text!r})"

    @cached_property
    def degree(self) -> int:
        if self.expr == 0:
            return 0
        return int(sympy.Poly(self.expr, _u, _ux).total_degree())

    @property
    def is_zero(self) -> bool:
        return self.expr == 0

    @property
    def uses_ux(self) -> bool:
        return _ux in self.expr.free_symbols

    def _lambdify(self, expr) -> Callable:
        fn = sympy.lambdify((_u, _ux, _uxx), expr, "numpy")
        return lambda u, ux=None, uxx=None: np.broadcast_to(
            fn(u, np.zeros_like(u) if ux is None else ux, np.zeros_like(u) if uxx is None else uxx), np.shape(u)
        ).astype(float)

    @cached_property
    def f(self) -> Callable:
        return self._lambdify(self.expr)

    @cached_property
    def f_u(self) -> Callable:
        return self._lambdify(sympy.diff(self.expr, _u))

    @cached_property
    def transformed_integrand(self) -> sympy.Expr:
        """
        G(u, ux, uxx) with F(u) = (d_xx - 1)^{-1} G, from the chain rule for
        v = (d_xx - 1)^{-1} f(u, u_x) along u_t = u_xx - u + f:

            G = f_u f + f_ux (f_u ux + f_ux uxx) - f_u u - f_ux ux + f
                - (f_uu ux^2 + 2 f_uux ux uxx + f_uxux uxx^2)

        The signs of the trailing f term and of the second-derivative terms
        are the ones that make d/dt v + (1 - d_xx) v = F(u) hold along
        solutions (chain_rule_residual checks this). The variant with -f and
        +(second derivatives) does not: for f = u it gives F(sin x) = sin x / 2,
        while the chain rule gives -sin x / 2.
        """
        f = self.expr
        fu, fp = sympy.diff(f, _u), sympy.diff(f, _ux)
        hess = (sympy.diff(f, _u, 2) * _ux ** 2
                + 2 * sympy.diff(f, _u, _ux) * _ux * _uxx
                + sympy.diff(f, _ux, 2) * _uxx ** 2)
        return sympy.expand(fu * f + fp * (fu * _ux + fp * _uxx) - fu * _u - fp * _ux + f - hess)

    @cached_property
    def G(self) -> Callable:
        return self._lambdify(self.transformed_integrand)

    @cached_property
    def G_degree(self) -> int:
        g = self.transformed_integrand
        return 0 if g == 0 else int(sympy.Poly(g, _u, _ux, _uxx).total_degree())


def as_expression(f) -> NonlinearityExpression:
    return f if isinstance(f, NonlinearityExpression) else NonlinearityExpression(f)


def _check_field(u: FourierField, check: str):
    if not u.real:
        raise ParameterError(f"{check} needs a real field (reality flag set)", check=check)
    if u.N_f < MIN_MODES:
        raise SizeError(f"{check} needs N_f >= {MIN_MODES} (got {u.N_f})", check=check)


def _trajectory(times: np.ndarray, states: np.ndarray, scheme: str, order: int, N_f: int) -> Trajectory:
    return Trajectory(times=times, states=states, scheme=scheme, order=order, mode_labels=list(_wavenumbers(N_f)))


# ============================================================
# Burgers
# ============================================================

@dataclass
class BurgersKwakState:
    u: FourierField
    v: FourierField
    w: FourierField
    nu: float
    f: NonlinearityExpression = field(default_factory=lambda: NonlinearityExpression("0"))

    def to_array(self) -> np.ndarray:
        return np.vstack([self.u.coefficients, self.v.coefficients, self.w.coefficients])

    def norm(self) -> float:
        return float(np.linalg.norm(self.to_array()))

    def consistency_error(self) -> float:
        """max(||v - u_x||, ||w - u^2/nu||) in coefficients."""
        dv = (self.v - self.u.derivative()).norm()
        dw = (self.w - pseudo_product(self.u, self.u).scaled(1.0 / self.nu)).norm()
        return max(dv, dw)


def _burgers_ladder(N_f: int, nu: float) -> np.ndarray:
    return fourier_eigenvalues(N_f, nu)


def burgers_evolve(u0: FourierField, nu: float, f="0", t_span: Tuple[float, float] = (0.0, 0.5),
                   dt: Optional[float] = None, scheme: str = "midpoint") -> Trajectory:
    """u_t = nu u_xx + (u^2)_x - f(u), exponential integrator in Fourier space."""
    if not nu > 0.0:
        raise ParameterError(f"viscosity must be positive (got {nu!r})", check="burgers_evolve")
    _check_field(u0, "burgers_evolve")
    f = as_expression(f)
    if f.uses_ux:
        raise ParameterError("Burgers reaction term must depend on u only", check="burgers_evolve")
    N_f = u0.N_f
    ik = 1j * _wavenumbers(N_f)
    P = dealias_size(N_f, max(2, f.degree))

    def rhs(t, x):
        u = to_grid(x[0], P)
        out = ik * from_grid(u * u, N_f) - from_grid(f.f(u), N_f)
        return out[None, :]

    times = uniform_grid(t_span, dt or DEFAULT_DT)
    traj = exponential_integrate(_burgers_ladder(N_f, nu), SCALAR, rhs, u0.coefficients[None, :], times,
                                 scheme=scheme, check="burgers_evolve")
    return _trajectory(traj.times, traj.states, traj.scheme, traj.order, N_f)


def burgers_kwak_transform(u: FourierField, nu: float, f="0") -> BurgersKwakState:
    """(u, v = u_x, w = u^2/nu)."""
    if not u.real:
        raise ParameterError("burgers_kwak_transform needs a real field")
    if not nu > 0.0:
        raise ParameterError(f"viscosity must be positive (got {nu!r})")
    return BurgersKwakState(u=u, v=u.derivative(), w=pseudo_product(u, u).scaled(1.0 / nu), nu=nu, f=as_expression(f))


def burgers_system_nonlinearity(state: np.ndarray, nu: float, f: NonlinearityExpression) -> np.ndarray:
    """(2uv - f(u), -f'(u) v, 2 u (2uv - f(u)) / nu - 2 v^2) for a (3, 2N_f+1) coefficient array."""
    N_f = (state.shape[-1] - 1) // 2
    P = dealias_size(N_f, max(3, f.degree + 1))
    u = to_grid(state[0], P)
    v = to_grid(state[1], P)
    r = 2.0 * u * v - f.f(u)
    return np.vstack([
        from_grid(r, N_f),
        from_grid(-f.f_u(u) * v, N_f),
        from_grid(2.0 * u * r / nu - 2.0 * v * v, N_f),
    ])


def burgers_system_evolve(state0: BurgersKwakState, t_span: Tuple[float, float] = (0.0, 0.5),
                          dt: Optional[float] = None, scheme: str = "midpoint") -> Trajectory:
    """The lifted 3-component system with linear part nu k^2 [[1,0,0],[0,1,1],[0,0,1]]."""
    N_f = state0.u.N_f
    f = state0.f
    times = uniform_grid(t_span, dt or DEFAULT_DT)
    traj = exponential_integrate(
        _burgers_ladder(N_f, state0.nu), BURGERS_PATTERN,
        lambda t, x: burgers_system_nonlinearity(x, state0.nu, f),
        state0.to_array(), times, scheme=scheme, check="burgers_system_evolve",
    )
    return _trajectory(traj.times, traj.states, traj.scheme, traj.order, N_f)


# ============================================================
# Reaction-diffusion-advection
# ============================================================

@dataclass
class RDAKwakState:
    u: FourierField
    v: FourierField
    f: NonlinearityExpression

    def to_array(self) -> np.ndarray:
        return np.vstack([self.u.coefficients, self.v.coefficients])

    def norm(self) -> float:
        return float(np.linalg.norm(self.to_array()))

    def consistency_error(self) -> float:
        return float(np.linalg.norm(self.v.coefficients - _inverse_shifted(rda_f(self.u.coefficients, self.f))))


def rda_ladder(N_f: int) -> np.ndarray:
    """Eigenvalues 1 + k^2 of A = 1 - d_xx on the Fourier modes."""
    return fourier_eigenvalues(N_f, 1.0, 1.0)


def _inverse_shifted(coeffs: np.ndarray) -> np.ndarray:
    """(d_xx - 1)^{-1}: division by -(1 + k^2), defined on every mode."""
    N_f = (coeffs.shape[-1] - 1) // 2
    return -coeffs / rda_ladder(N_f)


def rda_f(coeffs: np.ndarray, f: NonlinearityExpression) -> np.ndarray:
    """f(u, u_x) in coefficients; acts on the last axis."""
    N_f = (coeffs.shape[-1] - 1) // 2
    P = dealias_size(N_f, f.degree)
    ik = 1j * _wavenumbers(N_f)
    return from_grid(f.f(to_grid(coeffs, P), to_grid(ik * coeffs, P)), N_f)


def rda_F(coeffs: np.ndarray, f: NonlinearityExpression) -> np.ndarray:
    N_f = (coeffs.shape[-1] - 1) // 2
    P = dealias_size(N_f, f.G_degree)
    ik = 1j * _wavenumbers(N_f)
    g = f.G(to_grid(coeffs, P), to_grid(ik * coeffs, P), to_grid(ik * ik * coeffs, P))
    return _inverse_shifted(from_grid(g, N_f))


def rda_nonlinearity_F(u: FourierField, f) -> FourierField:
    """The transformed nonlinearity F(u) = (d_xx - 1)^{-1} G(u, u_x, u_xx)."""
    return FourierField(rda_F(u.coefficients, as_expression(f)))


def rda_evolve(u0: FourierField, f, t_span: Tuple[float, float] = (0.0, 0.5),
               dt: Optional[float] = None, scheme: str = "midpoint") -> Trajectory:
    """u_t + (1 - d_xx) u = f(u, u_x), pseudospectral."""
    _check_field(u0, "rda_evolve")
    f = as_expression(f)
    times = uniform_grid(t_span, dt or DEFAULT_DT)
    traj = exponential_integrate(rda_ladder(u0.N_f), SCALAR, lambda t, x: rda_f(x, f), u0.coefficients[None, :],
                                 times, scheme=scheme, check="rda_evolve")
    return _trajectory(traj.times, traj.states, traj.scheme, traj.order, u0.N_f)


def rda_kwak_transform(u: FourierField, f) -> RDAKwakState:
    """(u, v = (d_xx - 1)^{-1} f(u, u_x))."""
    if not u.real:
        raise ParameterError("rda_kwak_transform needs a real field")
    f = as_expression(f)
    return RDAKwakState(u=u, v=FourierField(_inverse_shifted(rda_f(u.coefficients, f))), f=f)


def rda_jordan_evolve(state0: RDAKwakState, t_span: Tuple[float, float] = (0.0, 0.5),
                      dt: Optional[float] = None, scheme: str = "midpoint") -> Trajectory:
    """d/dt (u, v) + [[1,1],[0,1]] A (u, v) = (0, F(u)) with A = 1 - d_xx."""
    f = state0.f
    N_f = state0.u.N_f

    def rhs(t, x):
        out = np.zeros_like(x)
        out[1] = rda_F(x[0], f)
        return out

    times = uniform_grid(t_span, dt or DEFAULT_DT)
    traj = exponential_integrate(rda_ladder(N_f), JORDAN_2, rhs, state0.to_array(), times,
                                 scheme=scheme, check="rda_jordan_evolve")
    return _trajectory(traj.times, traj.states, traj.scheme, traj.order, N_f)


def iterated_rda_transform(u: FourierField, f) -> np.ndarray:
    """(u, v, w) with w = -A^{-1} F(u); the triple solves the 3-Jordan system."""
    f = as_expression(f)
    v = _inverse_shifted(rda_f(u.coefficients, f))
    w = -rda_F(u.coefficients, f) / rda_ladder(u.N_f)
    return np.vstack([u.coefficients, v, w])


def _central(values: np.ndarray, h: float) -> np.ndarray:
    return (values[2:] - values[:-2]) / (2.0 * h)


def chain_rule_residual(traj: Trajectory, f) -> float:
    """
    Max over interior times of ||dv/dt + A v - F(u)|| with v = (d_xx - 1)^{-1} f(u, u_x)
    along a trajectory of rda_evolve; centered differences, so O(dt^2).
    """
    if len(traj) < 3:
        raise SizeError("chain_rule_residual needs at least 3 grid points")
    f = as_expression(f)
    u = traj.states[:, 0, :]
    lam = rda_ladder((u.shape[-1] - 1) // 2)
    v = _inverse_shifted(rda_f(u, f))
    res = _central(v, traj.dt) + lam * v[1:-1] - rda_F(u[1:-1], f)
    return float(np.max(np.linalg.norm(res, axis=-1)))


def iterated_chain_residual(traj: Trajectory, f) -> Dict[str, object]:
    """
    Residuals of the first two rows of the 3-Jordan system along an rda_evolve
    trajectory, plus samples of Phi(u) = dw/dt + A w.
    """
    if len(traj) < 3:
        raise SizeError("iterated_chain_residual needs at least 3 grid points")
    f = as_expression(f)
    u = traj.states[:, 0, :]
    lam = rda_ladder((u.shape[-1] - 1) // 2)
    v = _inverse_shifted(rda_f(u, f))
    w = -rda_F(u, f) / lam
    h = traj.dt
    row_u = _central(u, h) + lam * (u[1:-1] + v[1:-1])
    row_v = _central(v, h) + lam * (v[1:-1] + w[1:-1])
    phi = _central(w, h) + lam * w[1:-1]
    picks = np.linspace(0, phi.shape[0] - 1, min(10, phi.shape[0])).astype(int)
    return {
        "pattern": JORDAN_3.tolist(),
        "row_u": float(np.max(np.linalg.norm(row_u, axis=-1))),
        "row_v": float(np.max(np.linalg.norm(row_v, axis=-1))),
        "phi_norms": [float(np.linalg.norm(phi[j])) for j in picks],
    }


# ============================================================
# Self-adjoint re-embedding
# ============================================================

def _sqrt_ladder(ladder: Union[EigenvalueLadder, np.ndarray]) -> np.ndarray:
    lam = ladder.array() if isinstance(ladder, EigenvalueLadder) else np.asarray(ladder, dtype=float)
    if np.any(lam <= 0.0):
        raise ParameterError("re-embedding needs strictly positive eigenvalues", check="self_adjoint_reembedding")
    return np.sqrt(lam)


def self_adjoint_reembedding(state: StateVector, ladder, inverse: bool = False) -> StateVector:
    """(u, v) -> (A^{-1/2} u, v); the inverse maps (u~, v) -> (A^{1/2} u~, v)."""
    arr = state.components if isinstance(state, StateVector) else np.asarray(state)
    if arr.ndim != 2 or arr.shape[0] != 2:
        raise ShapeError(f"re-embedding needs a 2-component state, got shape {arr.shape}")
    root = _sqrt_ladder(ladder)
    if root.size != arr.shape[1]:
        raise ShapeError(f"ladder has {root.size} modes, state has {arr.shape[1]}")
    out = np.array(arr, dtype=np.result_type(arr, float), copy=True)
    out[0] = arr[0] * root if inverse else arr[0] / root
    return StateVector(out)


def reembedded_nonlinearity(F: Callable[[np.ndarray], np.ndarray], ladder) -> Callable[[np.ndarray], np.ndarray]:
    """(u~, v) -> (-A^{1/2} v, F(A^{1/2} u~)); acts on (..., 2, N) arrays."""
    root = _sqrt_ladder(ladder)

    def evaluate(x):
        out = np.empty_like(x)
        out[..., 0, :] = -root * x[..., 1, :]
        out[..., 1, :] = F(root * x[..., 0, :])
        return out

    return evaluate


def hl_norm(x: np.ndarray, L: float) -> np.ndarray:
    """sqrt(L ||u||^2 + ||v||^2) over the last two axes."""
    return np.sqrt(L * np.sum(x[..., 0, :] ** 2, axis=-1) + np.sum(x[..., 1, :] ** 2, axis=-1))


SYNTHETIC_PROFILES: Dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "tanh": np.tanh,
    "sin": np.sin,
    "linear": lambda x: x,
    "clip": lambda x: np.clip(x, -0.5, 0.5),
    "softsign": lambda x: x / (1.0 + np.abs(x)),
}


def synthetic_nonlinearity(profile: str, L: float, N: int, rng: np.random.Generator) -> Callable[[np.ndarray], np.ndarray]:
    """u -> L W g(u) with g 1-Lipschitz elementwise and ||W||_2 = 1."""
    if profile not in SYNTHETIC_PROFILES:
        raise ParameterError(f"unknown profile {profile!r}; choose from {sorted(SYNTHETIC_PROFILES)}")
    g = SYNTHETIC_PROFILES[profile]
    W = rng.standard_normal((N, N))
    W /= np.linalg.norm(W, 2)
    return lambda u: L * np.einsum("ij,...j->...i", W, g(u))


def hl_lipschitz_ratio(F: Callable[[np.ndarray], np.ndarray], L: float, ladder, pairs: int,
                       rng: np.random.Generator, scale: float = 1.0) -> float:
    """
    Max over random pairs of ||FF(x) - FF(y)||_{H_L} / ||A^{1/2}(x - y)||_{H_L}
    for the re-embedded nonlinearity FF; bounded by sqrt(L) when F is L-Lipschitz.
    """
    root = _sqrt_ladder(ladder)
    FF = reembedded_nonlinearity(F, ladder)
    N = root.size
    x = scale * rng.standard_normal((pairs, 2, N)) / root
    y = scale * rng.standard_normal((pairs, 2, N)) / root
    num = hl_norm(FF(x) - FF(y), L)
    den = hl_norm(root * (x - y), L)
    return float(np.max(num / den))


# ============================================================
# Commuting diagrams
# ============================================================

@dataclass
class DiagramResult:
    error: float
    refined_error: float
    N_f: int
    dt: float

    @property
    def refinement_ratio(self) -> float:
        return self.error / self.refined_error if self.refined_error > 0.0 else float("inf")


def _relative(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(a), np.finfo(float).tiny))


def burgers_diagram_error(u0: FourierField, nu: float, f, T: float, dt: float) -> float:
    """Relative H-difference of transform(evolve(u0)) and evolve(transform(u0)) at time T."""
    f = as_expression(f)
    direct = burgers_evolve(u0, nu, f, (0.0, T), dt)
    top = burgers_kwak_transform(FourierField(direct.states[-1, 0]), nu, f).to_array()
    lifted = burgers_system_evolve(burgers_kwak_transform(u0, nu, f), (0.0, T), dt)
    return _relative(top, lifted.states[-1])


def rda_diagram_error(u0: FourierField, f, T: float, dt: float) -> float:
    f = as_expression(f)
    direct = rda_evolve(u0, f, (0.0, T), dt)
    top = rda_kwak_transform(FourierField(direct.states[-1, 0]), f).to_array()
    lifted = rda_jordan_evolve(rda_kwak_transform(u0, f), (0.0, T), dt)
    return _relative(top, lifted.states[-1])


def commuting_diagram_burgers(u0: FourierField, nu: float = 1.0, f="0.1*u**3", T: float = 0.5,
                              dt: float = DEFAULT_DT) -> DiagramResult:
    """Error at (dt, N_f) and after the simultaneous refinement (dt/2, 2N_f)."""
    err = burgers_diagram_error(u0, nu, f, T, dt)
    fine = burgers_diagram_error(u0.resized(2 * u0.N_f), nu, f, T, 0.5 * dt)
    logger.info(f"commuting_diagram_burgers: error {err:.3e} -> {fine:.3e}")
    return DiagramResult(error=err, refined_error=fine, N_f=u0.N_f, dt=dt)


def commuting_diagram_rda(u0: FourierField, f="-u**3 + 0.1*u*ux", T: float = 0.5,
                          dt: float = DEFAULT_DT) -> DiagramResult:
    err = rda_diagram_error(u0, f, T, dt)
    fine = rda_diagram_error(u0.resized(2 * u0.N_f), f, T, 0.5 * dt)
    logger.info(f"commuting_diagram_rda: error {err:.3e} -> {fine:.3e}")
    return DiagramResult(error=err, refined_error=fine, N_f=u0.N_f, dt=dt)
