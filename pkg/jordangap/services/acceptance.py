"""
Check bookkeeping and the experiment suites shared by the CLI commands.

Every suite returns a CheckList; a failing numerical step becomes a failed
check carrying the error detail instead of aborting the whole run.
"""

import logging
import math
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Any, Dict, Iterator, List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.linalg import expm

from jordangap.errors import JordanGapError
from jordangap.schemas.config import ExperimentConfig
from jordangap.schemas.models import CheckResult, ExplicitLadder, NonlinearityForm, NormMode, PowerLadder
from jordangap.services import gapcheck, kwak, linop, perron, sharpness
from jordangap.services.dynamics import JordanSystem, NonlinearitySpec, block_propagator, evolve, standard_pattern
from jordangap.services.spectra import EigenvalueLadder, make_ladder

logger = logging.getLogger("jordangap.acceptance")


# ============================================================
# Checks
# ============================================================

@dataclass
class CheckList:
    """Ordered pass/fail records; upper-bound tolerances are multiplied by tol_scale."""

    tol_scale: float = 1.0
    items: List[CheckResult] = field(default_factory=list)

    def below(self, name: str, value: float, threshold: float, detail: Optional[str] = None) -> bool:
        limit = threshold * self.tol_scale
        ok = bool(np.isfinite(value) and value < limit)
        self.items.append(CheckResult(name=name, value=float(value), threshold=limit, passed=ok, detail=detail))
        return ok

    def at_least(self, name: str, value: float, threshold: float, detail: Optional[str] = None) -> bool:
        ok = bool(not np.isnan(value) and value >= threshold)
        self.items.append(CheckResult(name=name, value=float(value), threshold=float(threshold), passed=ok, detail=detail))
        return ok

    def flag(self, name: str, passed: bool, detail: Optional[str] = None, value: Optional[float] = None) -> bool:
        self.items.append(CheckResult(name=name, value=value, passed=bool(passed), detail=detail))
        return bool(passed)

    def fail(self, name: str, detail: str):
        self.items.append(CheckResult(name=name, passed=False, detail=detail))

    @contextmanager
    def guard(self, name: str) -> Iterator[None]:
        """Record a failed check instead of propagating a library error."""
        try:
            yield
        except JordanGapError as e:
            logger.warning(f"{name} failed: {e.detail}")
            self.fail(name, e.detail)

    def extend(self, other: "CheckList"):
        self.items.extend(other.items)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.items)

    @property
    def failures(self) -> List[CheckResult]:
        return [c for c in self.items if not c.passed]


@contextmanager
def timed(label: str) -> Iterator[None]:
    """Log wall-clock time; timings never enter reports."""
    start = time.perf_counter()
    yield
    logger.info(f"{label}: {time.perf_counter() - start:.2f}s")


def random_pairs(rng: np.random.Generator, count: int, low: float = 1e-2, high: float = 1e4) -> np.ndarray:
    """count x 2 array of strictly increasing log-uniform pairs."""
    out = np.empty((count, 2))
    i = 0
    while i < count:
        a, b = np.sort(np.exp(rng.uniform(math.log(low), math.log(high), 2)))
        if b > a * (1.0 + 1e-9):
            out[i] = (a, b)
            i += 1
    return out


def build_system(config: ExperimentConfig, rng: np.random.Generator,
                 form: Optional[NonlinearityForm] = None, L: Optional[float] = None) -> JordanSystem:
    ladder = make_ladder(config.ladder, config.size)
    m = config.nonlinearity.m
    form = form or config.nonlinearity.form
    L = config.L if L is None else L
    if config.nonlinearity.kind == "zero":
        F = NonlinearitySpec.zero(form)
    else:
        # amplitude scaled so the sampled Lipschitz ratio is L
        F = NonlinearitySpec.calibrated(L, m, ladder.N, rng, form=form, scale=config.manifold.scale)
    return JordanSystem(ladder=ladder, nonlinearity=F, pattern=standard_pattern(m))


def perron_settings(config: ExperimentConfig, max_iter: Optional[int] = None) -> perron.PerronSettings:
    s = config.solver
    return perron.PerronSettings(T=s.T, dt=s.dt, tol=s.tol, max_iter=max_iter or s.max_iter, noise_floor=s.noise_floor)


# ============================================================
# Linear operator norms
# ============================================================

def operator_norm_sweep(rng: np.random.Generator, count: int, points: int = 4001, factor: float = 10.0,
                        tol_scale: float = 1.0) -> CheckList:
    """Closed forms against the frequency-grid oracle and the golden-section theta."""
    checks = CheckList(tol_scale)
    pairs = random_pairs(rng, count)
    full_err = theta_err = tr_err = tr_theta_err = 0.0
    ordered = True
    for a, b in pairs:
        ladder = EigenvalueLadder(values=(a, b), generator=ExplicitLadder(values=(a, b)))
        grid = linop.OmegaGrid(extent=factor * b, points=points)
        closed = linop.norm_L_full(a, b)
        oracle = linop.oracle_norm(ladder, closed.theta, grid, NormMode.FULL)
        full_err = max(full_err, abs(closed.norm - oracle.norm) / closed.norm)
        theta_err = max(theta_err, abs(linop.minimax_theta(a, b, NormMode.FULL) - closed.theta.theta) / closed.theta.theta)

        tr = linop.norm_L_truncated(a, b)
        tr_oracle = linop.oracle_norm(ladder, tr.theta, grid, NormMode.TRUNCATED)
        tr_err = max(tr_err, abs(tr.norm - tr_oracle.norm) / tr.norm)
        tr_theta_err = max(tr_theta_err,
                           abs(linop.minimax_theta(a, b, NormMode.TRUNCATED) - tr.theta.theta) / tr.theta.theta)
        ordered = ordered and tr.norm <= closed.norm * (1.0 + 1e-12)
    checks.below("operator_norm.full_vs_oracle", full_err, 1e-6)
    checks.below("operator_norm.theta_vs_minimax", theta_err, 1e-8)
    checks.below("operator_norm.truncated_vs_oracle", tr_err, 1e-9)
    checks.below("operator_norm.truncated_theta_vs_minimax", tr_theta_err, 1e-10)
    checks.flag("operator_norm.truncated_below_full", ordered)
    return checks


def monotonicity_suite(size: int = 50, step: float = 1e-5, band: float = 1e-9) -> CheckList:
    """
    Finite-difference signs of mu_min: nondecreasing in |omega|, and V-shaped
    in theta (all omega) and in lambda (omega = 0) with the minimum at theta = lambda.
    """
    checks = CheckList()
    lam = np.geomspace(1e-2, 1e4, size)
    theta = np.geomspace(1.3e-2, 0.9e4, size)
    w_unit = np.linspace(-10.0, 10.0, size)
    Lm, Tm, Wu = np.meshgrid(lam, theta, w_unit, indexing="ij")
    Wm = Wu * Lm

    def sign_violations(f_plus, f_minus, expected, base):
        diff = (f_plus - f_minus) * expected
        return int(np.sum(diff < -band * np.abs(base)))

    base = linop.mu_min(Lm, Tm, Wm)
    h = step * np.maximum(np.abs(Wm), Lm)
    v_omega = sign_violations(linop.mu_min(Lm, Tm, Wm + h), linop.mu_min(Lm, Tm, Wm - h), np.sign(Wm), base)

    h = step * Tm
    away = np.abs(Tm - Lm) > 2.0 * h
    expected = np.where(Tm > Lm, 1.0, -1.0) * away
    v_theta = sign_violations(linop.mu_min(Lm, Tm + h, Wm), linop.mu_min(Lm, Tm - h, Wm), expected, base)

    L2, T2 = np.meshgrid(lam, theta, indexing="ij")
    h = step * L2
    away = np.abs(T2 - L2) > 2.0 * h
    expected = np.where(L2 > T2, 1.0, -1.0) * away
    v_lam = sign_violations(linop.mu_min(L2 + h, T2), linop.mu_min(L2 - h, T2), expected, linop.mu_min(L2, T2))

    checks.below("monotonicity.omega_violations", v_omega, 0.5)
    checks.below("monotonicity.theta_violations", v_theta, 0.5)
    checks.below("monotonicity.lambda_violations", v_lam, 0.5)
    return checks


def denominator_bounds(rng: np.random.Generator, count: int, tol_scale: float = 1.0) -> CheckList:
    """Strict two-sided bound of the Jordan gap denominator and agreement with the direct formula."""
    checks = CheckList(tol_scale)
    pairs = random_pairs(rng, count)
    strict = True
    agree = 0.0
    for a, b in pairs:
        lo, hi = gapcheck.gap_equivalence_bounds(a, b)
        mid = a + b + 2.0 * math.sqrt(a * a - a * b + b * b)
        den = linop.gap_denominator(a, b)
        strict = strict and lo < den < hi
        agree = max(agree, abs(mid - den) / den)
    checks.flag("gap_bounds.strict", strict, detail=f"{count} pairs")
    checks.below("gap_bounds.denominator_agreement", agree, 1e-12)
    return checks


def propagator_exactness(rng: np.random.Generator, count: int, tol_scale: float = 1.0) -> CheckList:
    checks = CheckList(tol_scale)
    worst = group = 0.0
    for _ in range(count):
        m = int(rng.integers(2, 4))
        lam = float(np.exp(rng.uniform(math.log(1e-2), math.log(1e2))))
        t, s = rng.uniform(0.0, 1.0, 2)
        J = standard_pattern(m)
        P = block_propagator(lam, t, m)
        ref = expm(-t * lam * J)
        worst = max(worst, float(np.max(np.abs(P - ref))) / max(1.0, float(np.max(np.abs(ref)))))
        both = block_propagator(lam, t + s, m)
        prod = P @ block_propagator(lam, s, m)
        group = max(group, float(np.max(np.abs(both - prod))) / max(1.0, float(np.max(np.abs(both)))))
    checks.below("propagator.vs_expm", worst, 1e-12)
    checks.below("propagator.group_law", group, 1e-13)
    return checks


# ============================================================
# Perron construction
# ============================================================

def manifold_samples(graph: perron.ManifoldGraph, count: int, scale: float,
                     rng: np.random.Generator) -> Tuple[List[np.ndarray], List[np.ndarray]]:
    points = perron.random_base_points(graph, count, rng, scale)
    return points, perron.sample_manifold(graph, points)


def samples_frame(points: List[np.ndarray], values: List[np.ndarray]) -> pd.DataFrame:
    """One row per sample: base coordinates p_c{c}_k{k}, graph values q_c{c}_k{k}."""
    rows = []
    for i, (p, q) in enumerate(zip(points, values)):
        row: Dict[str, Any] = {"sample": i}
        m, N = p.shape
        for c in range(m):
            for k in range(N):
                row[f"p_c{c}_k{k + 1}"] = p[c, k]
        for c in range(m):
            for k in range(N):
                row[f"q_c{c}_k{k + 1}"] = q[c, k]
        rows.append(row)
    return pd.DataFrame(rows)


PERRON_STAGES = ("contraction", "manifold", "invariance", "tracking")


def perron_suite(config: ExperimentConfig, rng: np.random.Generator, form: NonlinearityForm, L: float,
                 theta: Optional[float] = None, stages: Tuple[str, ...] = PERRON_STAGES,
                 tol_scale: float = 1.0) -> Tuple[CheckList, Dict[str, Any]]:
    """
    Contraction, manifold sampling, invariance and tracking for one system.

    The measured rate is compared with L times the operator norm at the
    chosen weight; invariance is measured over manifold.horizon. DataFrames
    and trajectories in the results are meant for CSV, not for the JSON report.
    """
    checks = CheckList(tol_scale)
    tag = "perron" if form == NonlinearityForm.GENERAL else "perron_lt"
    results: Dict[str, Any] = {"form": form.value, "L": L}
    system = build_system(config, rng, form=form, L=L)
    n = config.n
    # lower-triangular contraction factors sit near 1, allow more sweeps
    max_iter = config.solver.max_iter if form == NonlinearityForm.GENERAL else max(config.solver.max_iter, 1000)
    settings = perron_settings(config, max_iter)

    with checks.guard(f"{tag}.construction"):
        graph = perron.ManifoldGraph(system, n, theta if theta is not None else config.theta, settings)
        op_norm = graph.operator_norm
        results.update(theta=graph.theta.theta, operator_norm=op_norm, base_dimension=graph.base_dimension,
                       lipschitz_bound=graph.lipschitz_bound)
        base = perron.random_base_points(graph, 1, rng, config.manifold.scale)[0]

        if "contraction" in stages:
            solved = graph.solve(base)
            results.update(iterations=solved.iterations, contraction_rate=solved.contraction_rate)
            checks.below(f"{tag}.contraction_rate", solved.contraction_rate, L * op_norm + 0.02,
                         detail=f"L*||L|| = {L * op_norm:.6g}")

        if "manifold" in stages:
            points, values = manifold_samples(graph, config.manifold.samples, config.manifold.scale, rng)
            ratio, pairs = perron.lipschitz_sampling(graph, points, values)
            results.update(lipschitz_ratio=ratio, lipschitz_pairs=pairs, cache=graph.cache.stats())
            if math.isfinite(graph.lipschitz_bound):
                checks.below(f"{tag}.lipschitz_ratio", ratio, graph.lipschitz_bound + 0.05)
            else:
                checks.flag(f"{tag}.lipschitz_ratio", False, detail="L*||L|| >= 1, no contraction bound")
            results["samples"] = samples_frame(points, values)

        if "invariance" in stages:
            inv = perron.verify_invariance(graph, base, config.manifold.horizon, config.manifold.invariance_samples)
            results["invariance"] = inv
            checks.below(f"{tag}.invariance_defect", inv.max_defect, 1e-5)

        if "tracking" in stages:
            xi0 = config.tracking.amplitude * rng.standard_normal((system.m, system.N))
            forward = evolve(system, xi0, (0.0, config.tracking.t_plus), dt=config.tracking.dt)
            trace, report = perron.tracking_trace(system, n, graph.theta.theta, forward, settings)
            results["tracking"] = report
            results["trace"] = trace
            results["forward"] = forward
            if report.at_noise_floor:
                checks.flag(f"{tag}.tracking_rate", False, detail="fewer than two samples above the noise floor on the fit window")
            else:
                checks.at_least(f"{tag}.tracking_rate", report.fitted_rate, 0.95 * graph.theta.theta)
    return checks, results


# ============================================================
# Sharpness
# ============================================================

def sharpness_suite(lambda_n: float = 1.0, lambda_np1: float = 4.0, epsilon: float = 0.01, L: float = 0.8,
                    periods: float = 3.0, tol_scale: float = 1.0) -> Tuple[CheckList, Dict[str, Any]]:
    checks = CheckList(tol_scale)
    a, b = lambda_n, lambda_np1
    r = math.sqrt(a * a - a * b + b * b)
    K_full = (b - a) ** 2 / (a + b + 2.0 * r)
    K_tr = (math.sqrt(b) - math.sqrt(a)) ** 2
    results: Dict[str, Any] = {}
    with checks.guard("sharpness"):
        full = sharpness.build_counterexample(a, b, None, NormMode.FULL)
        trunc = sharpness.build_counterexample(a, b, epsilon, NormMode.TRUNCATED)
        checks.below("sharpness.K_full", abs(full.K - K_full) / K_full, 1e-12)
        checks.below("sharpness.K_truncated", abs(trunc.K - K_tr) / K_tr, 1e-12)

        ladder = EigenvalueLadder(values=(a, b), generator=ExplicitLadder(values=(a, b)))
        cert = sharpness.gap_violation_certificate(ladder, L, "jordan_full")
        row = cert.rows[0]
        checks.flag("sharpness.gap_violated", row.violated, value=row.lhs)
        if row.counterexample_norm is not None:
            checks.below("sharpness.counterexample_norm", row.counterexample_norm, L)
        else:
            checks.fail("sharpness.counterexample_norm", "no counterexample with ||F|| < L")

        checks.flag("sharpness.complex_pair", trunc.complex_pair() is not None)
        osc = sharpness.oscillation_demo(trunc, periods)
        checks.at_least("sharpness.zero_count", osc.zero_count, 6)
        checks.below("sharpness.char_poly", sharpness.characteristic_polynomial_check(trunc), 1e-10)
        osc_full = sharpness.oscillation_demo(full, periods)
        checks.below("sharpness.rotation_closed_form", osc_full.closed_form_error, 1e-8)
        results.update(full=full.to_report(), truncated=trunc.to_report(), oscillation=osc,
                       oscillation_full=osc_full, certificate=cert)
    return checks, results


# ============================================================
# Kwak transforms
# ============================================================

def kwak_suite(config: ExperimentConfig, rng: np.random.Generator, which: Tuple[str, ...] = ("burgers", "rda"),
               tol_scale: float = 1.0) -> Tuple[CheckList, Dict[str, Any]]:
    checks = CheckList(tol_scale)
    kc = config.kwak
    u0 = kwak.FourierField.random_smooth(kc.N_f, rng, decay=kc.decay, amplitude=kc.amplitude)
    results: Dict[str, Any] = {"u0_norm": u0.norm()}
    if "burgers" in which:
        with checks.guard("kwak.burgers"):
            res = kwak.commuting_diagram_burgers(u0, kc.nu, kc.burgers_f, kc.T, kc.dt)
            checks.below("kwak.burgers.diagram_error", res.error, 1e-4)
            checks.at_least("kwak.burgers.refinement_ratio", res.refinement_ratio, 3.0)
            results["burgers"] = {"error": res.error, "refined_error": res.refined_error,
                                  "refinement_ratio": res.refinement_ratio}
            results["burgers_trajectory"] = kwak.burgers_system_evolve(
                kwak.burgers_kwak_transform(u0, kc.nu, kc.burgers_f), (0.0, kc.T), kc.dt)
    if "rda" in which:
        with checks.guard("kwak.rda"):
            res = kwak.commuting_diagram_rda(u0, kc.rda_f, kc.T, kc.dt)
            checks.below("kwak.rda.diagram_error", res.error, 1e-4)
            checks.at_least("kwak.rda.refinement_ratio", res.refinement_ratio, 3.0)
            results["rda"] = {"error": res.error, "refined_error": res.refined_error,
                              "refinement_ratio": res.refinement_ratio}
            results["rda_trajectory"] = kwak.rda_jordan_evolve(kwak.rda_kwak_transform(u0, kc.rda_f), (0.0, kc.T), kc.dt)
    return checks, results


def hl_norm_suite(rng: np.random.Generator, pairs: int, L: float = 0.5, N: int = 16,
                  tol_scale: float = 1.0) -> CheckList:
    """Lipschitz ratio of the re-embedded nonlinearity in the H_L norm, per synthetic profile."""
    checks = CheckList(tol_scale)
    ladder = make_ladder(PowerLadder(), N)
    bound = math.sqrt(L) * (1.0 + 1e-6)
    for name in kwak.SYNTHETIC_PROFILES:
        F = kwak.synthetic_nonlinearity(name, L, N, rng)
        ratio = kwak.hl_lipschitz_ratio(F, L, ladder, pairs, rng)
        checks.flag(f"hl_norm.{name}", ratio <= bound, value=ratio,
                    detail=f"sqrt(L)(1+1e-6) = {bound:.9g}")
    return checks
