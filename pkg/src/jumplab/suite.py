"""Reference acceptance suite: one function per criterion, each returning a report.

Runtime limits are checked by :func:`run_criterion` and kept out of the
report itself, so report text and tables are reproducible byte for byte.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.stats import poisson

from .calculus import (FieldDifferential, evolve_field, identity_candidate,
                       ito_wentzell_residual, ito_wentzell_study, registry_candidate,
                       verify_first_integral)
from .fields import GridField, SpatialGrid
from .fields.initial import gaussian_density, mollified_delta
from .kernel import (check_global_invariants, check_pathwise_invariant, kernel_noise,
                     solve_kernel_spde)
from .kolmogorov import (chapman_consistency, drift_compensation_check, duality,
                         expectation_link, forward_vs_mc, solve_backward, solve_forward)
from .report import VerificationReport
from .sde_core import (REGISTRY, JumpDiffusionModel, NoiseRealization, TimeGrid,
                       evolve_jacobian, make_model, sample_noise, simulate_path)

REFERENCE_GRID = (-8.0, 8.0, 512)
IW_STUDY_SEEDS = 800


def reference_grid():
    return SpatialGrid.line(*REFERENCE_GRID)


def linear_flow(alpha=0.5):
    """1D ``a = alpha x``, ``b = 0``, no jumps."""
    return JumpDiffusionModel(
        n=1, m=1,
        drift=lambda t, x: alpha * np.asarray(x, dtype=float),
        diffusion=lambda t, x: np.zeros(np.shape(x) + (1,)),
        drift_jac=lambda t, x: np.full(np.shape(x)[:-1] + (1, 1), alpha),
        diffusion_jac=lambda t, x: np.zeros(np.shape(x)[:-1] + (1, 1, 1)),
        diffusion_hess=lambda t, x: np.zeros(np.shape(x)[:-1] + (1, 1, 1, 1)),
        name="linear_flow", params={"alpha": alpha}, time_homogeneous=True)


def single_jump_noise(model, T, tau, steps):
    """Zero Wiener increments and one jump of atom 0 at ``tau``."""
    grid = TimeGrid.uniform(0.0, T, steps).with_nodes([tau])
    return NoiseRealization(grid, np.zeros((model.m, grid.steps)), [tau], [0], model.marks,
                            seed=0)


def _interior(values, mask):
    return float(np.max(np.abs(values[mask])))


def first_integral_conservation(threads=1):
    rep = VerificationReport("first_integral_conservation",
                             config={"seeds": 100, "T": 1.0, "dt": 1e-3})
    grid = TimeGrid.uniform(0.0, 1.0, 1000)
    for key in ("pure_jump", "additive"):
        m = make_model(key)
        r = verify_first_integral(registry_candidate(m), m, range(100), grid, [0.3],
                                  threads=threads, tol=1e-10)
        rep.merge(r, key)
    return rep


def _geometric_drifts(threads=1):
    m = make_model("geometric")
    grid = TimeGrid.uniform(0.0, 1.0, 100)
    cand = verify_first_integral(registry_candidate(m), m, range(100), grid, [1.0],
                                 refinements=2, threads=threads, min_order=0.45)
    return m, grid, cand


def first_integral_convergence(threads=1):
    _, _, cand = _geometric_drifts(threads)
    rep = VerificationReport("first_integral_convergence")
    return rep.merge(cand, "geometric")


def negative_control(threads=1):
    m, grid, cand = _geometric_drifts(threads)
    ident = verify_first_integral(identity_candidate(), m, range(100), grid, [1.0],
                                  refinements=2, threads=threads)
    rep = VerificationReport("negative_control", config={"dt": 2.5e-3, "seeds": 100})
    rep.metrics["candidate_drift"] = cand.metrics["finest_max_drift"]
    rep.metrics["identity_drift"] = ident.metrics["finest_max_drift"]
    ratio = ident.metrics["finest_max_drift"] / cand.metrics["finest_max_drift"]
    rep.metrics["ratio"] = ratio
    rep.check("ratio", ratio, 10.0, ">")
    return rep


def ito_wentzell(threads=1):
    rep = VerificationReport("ito_wentzell")
    m = make_model("ou_jump")
    zero = FieldDifferential.constant(0.0, 0.0)
    fx = GridField.from_function(SpatialGrid.line(-8.0, 8.0, 64), lambda x: x[..., 0])
    worst = 0.0
    for seed in range(5):
        nz = sample_noise(m, TimeGrid.uniform(0.0, 1.0, 200), seed)
        tr = simulate_path(m, [0.2], nz)
        r = ito_wentzell_residual(zero, evolve_field(fx, zero, nz), m, tr, nz, table=False)
        worst = max(worst, r.metrics["max_residual_cont"], r.metrics["max_residual_jump"])
    rep.metrics["identity_step_residual"] = worst
    rep.check("identity_step_residual", worst, 1e-12)
    unit = make_model("additive", a=0.0, b=1.0, marks=None)
    f0 = GridField.from_function(SpatialGrid.line(-6.0, 6.0, 97), lambda x: 0.5 * x[..., 0] ** 2)
    study = ito_wentzell_study(unit, FieldDifferential.constant(0.0, 1.0), f0, [0.0],
                               range(IW_STUDY_SEEDS), TimeGrid.uniform(0.0, 1.0, 100),
                               levels=2, threads=threads, min_order=0.45)
    return rep.merge(study, "unit_noise")


def jacobian(threads=1):
    rep = VerificationReport("jacobian")
    rel = 0.0
    jmin = np.inf
    for key in sorted(REGISTRY):
        m = make_model(key)
        x0 = [1.0, 0.5] if m.n == 2 else [0.7]
        for seed in range(5):
            nz = sample_noise(m, TimeGrid.uniform(0.0, 1.0, 200), seed)
            tr = simulate_path(m, x0, nz)
            a, b = evolve_jacobian(m, tr, nz)
            rel = max(rel, float(np.max(np.abs(a.values - b.values) / np.abs(b.values))))
            jmin = min(jmin, float(a.values.min()), float(b.values.min()))
    rep.metrics["max_relative_gap"] = rel
    rep.metrics["min_J"] = jmin
    rep.check("max_relative_gap", rel, 1e-8)
    rep.check("min_J", jmin, 0.0, ">")
    m = linear_flow(0.5)
    nz = sample_noise(m, TimeGrid.uniform(0.0, 1.0, 1000), 0)
    a, _ = evolve_jacobian(m, simulate_path(m, [0.3], nz), nz)
    err = abs(float(a.values[-1]) - math.exp(0.5))
    rep.metrics["linear_flow_J1_error"] = err
    rep.check("linear_flow_J1_error", err, 1e-3)
    m = make_model("pure_jump", marks=((0.5, 1.0),), multiplicative=True)
    nz = single_jump_noise(m, 1.0, 0.5, 10)
    a, b = evolve_jacobian(m, simulate_path(m, [1.0], nz), nz)
    err = max(abs(float(a.values[-1]) - 1.5), abs(float(b.values[-1]) - 1.5))
    rep.metrics["single_jump_J_error"] = err
    rep.check("single_jump_J_error", err, 0.0)
    return rep


def kernel(threads=1):
    rep = VerificationReport("kernel")
    g = reference_grid()
    worst = 0.0
    for key in ("ou_jump", "geometric", "additive", "pure_jump"):
        m = make_model(key)
        K = solve_kernel_spde(m, g, gaussian_density(g, 0.5, 0.3 ** 2),
                              kernel_noise(m, g, 0.5, 3), store=50)
        gap = float(np.max(np.abs(K.mass() - 1.0)))
        rep.metrics[f"{key}.mass_gap"] = gap
        rep.metrics[f"{key}.boundary_loss"] = float(K.boundary_loss[-1])
        worst = max(worst, gap)
    rep.check("mass_gap", worst, 1e-2)
    m = make_model("ou_jump")
    K = solve_kernel_spde(m, g, gaussian_density(g, 0.5, 0.3 ** 2), kernel_noise(m, g, 0.5, 3))
    rep.merge(check_global_invariants(K, m, samples=10_000, seed=1), "global")

    m = linear_flow(0.5)
    nz = kernel_noise(m, g, 0.5, 1)
    K = solve_kernel_spde(m, g, gaussian_density(g, 0.0, 0.25), nz)
    tr = simulate_path(m, np.linspace(-1.5, 1.5, 31)[:, None], nz)
    J, _ = evolve_jacobian(m, tr, nz)

    def exact(t, x):
        y = x[..., 0] * np.exp(-0.5 * t)
        return np.exp(-0.5 * t) * np.exp(-y ** 2 / 0.5) / np.sqrt(0.5 * np.pi)

    pw = check_pathwise_invariant(K, tr, J, exact=exact)
    pw.check("max_residual", pw.metrics["max_residual"], 1e-2)
    rep.merge(pw, "linear_flow")

    m = make_model("pure_jump", marks=((1.0, 1.0),))
    K = solve_kernel_spde(m, g, gaussian_density(g, -1.0, 0.25),
                          single_jump_noise(m, 0.5, 0.25, 10))
    k = K.field.snapshot_index(0.25)
    x = g.x[..., 0]
    left = K.field.left_limits[k]
    ref = np.where(x - 1.0 >= x[0], CubicSpline(x, left)(x - 1.0), 0.0)
    err = float(np.max(np.abs(K.values[k] - ref)))
    rep.metrics["pull_back_error"] = err
    rep.metrics["pull_back_vs_exact_shift"] = float(
        np.max(np.abs(K.values[k] - gaussian_density(g, 0.0, 0.25))))
    rep.check("pull_back_error", err, 1e-8)
    return rep


def expectation(threads=1):
    m = make_model("ou_jump")
    g = reference_grid()
    return expectation_link(m, g, gaussian_density(g, 0.5, 0.3 ** 2), 0.5, realizations=200,
                            threads=threads)


def forward(threads=1):
    rep = VerificationReport("forward")
    g = reference_grid()
    x = g.x[..., 0]
    heat = make_model("additive", a=0.0, b=math.sqrt(2.0), marks=None)
    F = solve_forward(heat, g, gaussian_density(g, 0.0, 0.01), 0.25, store="ends")
    v = 0.01 + 2 * 0.25
    l1 = float(g.integrate(np.abs(F.final - np.exp(-x ** 2 / (2 * v)) / np.sqrt(2 * np.pi * v))))
    rep.metrics["heat_l1"] = l1
    rep.check("heat_l1", l1, 1e-2)

    go = SpatialGrid.line(-5.0, 5.0, 1024)
    xo = go.x[..., 0]
    ou = make_model("ou_jump", theta=1.0, sigma=1.0, marks=None)
    F = solve_forward(ou, go, gaussian_density(go, 1.0, 1e-4), 1.0, store="ends")
    mean = float(go.integrate(xo * F.final))
    var = float(go.integrate(xo ** 2 * F.final)) - mean ** 2
    rep.metrics["ou_mean_error"] = abs(mean - math.exp(-1.0))
    rep.metrics["ou_variance_error"] = abs(var - (1 - math.exp(-2.0)) / 2)
    rep.check("ou_mean_error", rep.metrics["ou_mean_error"], 1e-2)
    rep.check("ou_variance_error", rep.metrics["ou_variance_error"], 1e-2)

    gj = SpatialGrid.line(-4.0, 12.0, 512)
    xj = gj.x[..., 0]
    pj = make_model("pure_jump", marks=((1.0, 1.0),))
    F = solve_forward(pj, gj, mollified_delta(gj, 0.0), 1.0, dt=1e-2, store="ends")
    peaks = [abs(float(gj.integrate(F.final * (np.abs(xj - k) < 0.5))) - poisson.pmf(k, 1.0))
             for k in range(6)]
    rep.metrics["poisson_peak_error"] = max(peaks)
    rep.check("poisson_peak_error", max(peaks), 1e-2)
    return rep


def monte_carlo(threads=1):
    m = make_model("ou_jump")
    g = reference_grid()
    rep, _, _ = forward_vs_mc(m, g, gaussian_density(g, 0.5, 0.3 ** 2), 0.5,
                              samples=100_000, seed=0, threads=threads)
    return rep


def backward(threads=1):
    rep = VerificationReport("backward")
    g = SpatialGrid.line(-10.0, 10.0, 512)
    y = g.x[..., 0]
    B = solve_backward(make_model("ou_jump"), g, lambda x: np.ones(x.shape[:-1]), 1.0, 0.0)
    rep.metrics["constant_error"] = float(np.max(np.abs(B.values - 1.0)))
    rep.check("constant_error", rep.metrics["constant_error"], 1e-6)

    pj = make_model("pure_jump", marks=((1.0, 1.0),))
    B = solve_backward(pj, g, lambda x: np.cos(x[..., 0]), 1.0, 0.0, dt=1e-2)
    mix = sum(poisson.pmf(k, 1.0) * np.cos(y + k) for k in range(40))
    rep.metrics["poisson_mixture_error"] = _interior(B.start - mix, y <= 3.0)
    rep.check("poisson_mixture_error", rep.metrics["poisson_mixture_error"], 1e-2)

    heat = make_model("additive", a=0.0, b=math.sqrt(2.0), marks=None)
    B = solve_backward(heat, g, lambda x: np.cos(x[..., 0]), 1.0, 0.0)
    rep.metrics["gaussian_error"] = _interior(B.start - math.exp(-1.0) * np.cos(y),
                                              np.abs(y) <= 6.0)
    rep.check("gaussian_error", rep.metrics["gaussian_error"], 1e-2)

    m = make_model("ou_jump")
    gr = reference_grid()
    p0 = gaussian_density(gr, 0.5, 0.3 ** 2)
    rep.merge(duality(m, gr, p0, lambda x: x[..., 0], 1.0), "duality_x")
    rep.merge(duality(m, gr, p0, lambda x: np.cos(x[..., 0]), 1.0), "duality_cos")
    return rep


def chapman(threads=1):
    m = make_model("ou_jump")
    g = reference_grid()
    rep = chapman_consistency(m, g, gaussian_density(g, 0.5, 0.3 ** 2), 1.0)
    rep.check("l1_gap", rep.metrics["l1_gap"], 5e-2)
    return rep


def compensation(threads=1):
    m = make_model("ou_jump")
    g = reference_grid()
    return drift_compensation_check(m, g, gaussian_density(g, 0.5, 0.3 ** 2), 0.5)


@dataclass(frozen=True)
class Criterion:
    number: int
    title: str
    run: object
    time_limit: float = None


CRITERIA = (
    Criterion(1, "first-integral conservation", first_integral_conservation, 10.0),
    Criterion(2, "first-integral convergence order", first_integral_convergence, 60.0),
    Criterion(3, "negative control", negative_control),
    Criterion(4, "Ito-Wentzell residuals", ito_wentzell, 30.0),
    Criterion(5, "Jacobian", jacobian),
    Criterion(6, "kernel equation", kernel),
    Criterion(7, "expectation link", expectation, 300.0),
    Criterion(8, "forward equation oracles", forward),
    Criterion(9, "forward vs Monte Carlo", monte_carlo, 120.0),
    Criterion(10, "backward equation and duality", backward),
    Criterion(11, "Chapman consistency", chapman),
    Criterion(12, "drift compensation", compensation),
)


@dataclass
class CriterionResult:
    criterion: Criterion
    report: VerificationReport
    elapsed: float

    @property
    def in_time(self) -> bool:
        limit = self.criterion.time_limit
        return limit is None or self.elapsed < limit

    @property
    def passed(self) -> bool:
        return self.report.passed and self.in_time

    def line(self) -> str:
        c = self.criterion
        limit = "" if c.time_limit is None else f" (limit {c.time_limit:g} s)"
        flag = "PASS" if self.passed else "FAIL"
        why = ""
        if not self.report.passed:
            why = " failing: " + ", ".join(ch.name for ch in self.report.failing())
        elif not self.in_time:
            why = " failing: runtime"
        return f"{flag} criterion {c.number}: {c.title} [{self.elapsed:.1f} s{limit}]{why}"


def run_criterion(number, threads=1):
    c = next(c for c in CRITERIA if c.number == number)
    start = time.perf_counter()
    rep = c.run(threads=threads)
    return CriterionResult(c, rep, time.perf_counter() - start)
