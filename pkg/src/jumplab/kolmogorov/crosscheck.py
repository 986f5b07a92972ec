"""Cross-validation between the forward solver, the backward solver, kernel
ensembles and Monte Carlo."""

from __future__ import annotations

import numpy as np

from ..kernel.checks import sample_density
from ..kernel.solver import kernel_noise, solve_kernel_spde
from ..parallel import map_ordered
from ..report import VerificationReport
from .backward import march_backward
from .compensation import compensate_drift
from .forward import plan_steps, solve_forward
from .montecarlo import bin_masses, monte_carlo_density


def forward_vs_mc(model, grid, p0, T, samples=100_000, bins=50, seed=0, steps=None,
                  threads=1, tol=5e-2):
    """L1 distance between forward-solver bin masses and a Monte Carlo histogram."""
    fwd = solve_forward(model, grid, p0, T, store="ends")
    hist = monte_carlo_density(model, lambda rng, size: sample_density(grid, p0, size, rng),
                               samples, grid, T, bins=bins, steps=steps, seed=seed,
                               threads=threads)
    pde = bin_masses(grid, fwd.final, hist.edges)
    l1 = float(np.sum(np.abs(pde - hist.masses)))
    band = float(np.sum(np.sqrt(hist.masses * (1 - hist.masses) / hist.valid)))
    rep = VerificationReport("forward_vs_mc", config={"forward": fwd.scheme, "mc": hist.config})
    rep.metrics["l1"] = l1
    rep.metrics["mc_band"] = band
    rep.metrics["outside"] = hist.outside
    rep.metrics["diverged"] = hist.diverged
    for w in hist.warnings:
        rep.warn(w)
    rep.check("l1", l1, tol)
    rows = [[float(c), float(a), float(b)] for c, a, b in zip(hist.centers[0], pde, hist.masses)] \
        if grid.n == 1 else []
    rep.add_table("bins", ["center", "pde_mass", "mc_mass"], rows)
    return rep, fwd, hist


def expectation_link(model, grid, p0, T, realizations=200, seed=0, threads=1):
    """Mean of kernel solutions over independent noises against the forward density.

    The check is ``L1(mean, p) <= 3 / sqrt(M)``; the L1 norm of the
    pointwise ensemble standard error is reported with it.
    """
    fwd = solve_forward(model, grid, p0, T, store="ends")

    def one(k):
        nz = kernel_noise(model, grid, T, seed + k)
        return solve_kernel_spde(model, grid, p0, nz, store="ends").final

    finals = np.stack(map_ordered(one, range(realizations), threads))
    mean = finals.mean(axis=0)
    se = finals.std(axis=0, ddof=1) / np.sqrt(realizations)
    l1 = float(grid.integrate(np.abs(mean - fwd.final)))
    band = 3.0 / np.sqrt(realizations)
    rep = VerificationReport("expectation_link",
                             config={"forward": fwd.scheme, "realizations": realizations,
                                     "base_seed": seed})
    rep.metrics["l1"] = l1
    rep.metrics["band"] = band
    rep.metrics["l1_pointwise_se"] = float(grid.integrate(se))
    rep.check("l1", l1, band)
    return rep


def duality(model, grid, p0, phi, T, t0=0.0, points=5, tol=5e-2):
    """``I(s) = int v(s, y) p(s, y) dy`` should not depend on ``s``.

    ``v`` solves the backward equation from ``phi`` at ``T``; ``p`` solves the
    forward equation from ``p0`` at ``t0``; both use the same step.
    """
    steps, h, _ = plan_steps(model, grid, t0, T)
    ks = sorted(set(int(round(k)) for k in np.linspace(0, steps, points)))
    fwd = solve_forward(model, grid, p0, T, t0=t0, steps=steps, store=ks)
    phi_v = np.asarray(phi(grid.x), dtype=float) if callable(phi) else np.asarray(phi)
    _, vals = march_backward(model, grid, phi_v, t0, T, steps, store=[steps - k for k in ks])
    # march_backward returns increasing s; it keeps the requested steps and the two ends
    I = np.array([float(grid.integrate(v * p)) for v, p in zip(vals, fwd.values)])
    dev = float(np.max(np.abs(I - I[-1])))
    rep = VerificationReport("duality", config={"forward": fwd.scheme, "steps": steps,
                                                "dt": h, "s_points": fwd.times.tolist()})
    rep.metrics["max_deviation"] = dev
    rep.metrics["pairing_at_T"] = float(I[-1])
    rep.add_table("pairing", ["s", "integral"], zip(fwd.times, I))
    rep.check("max_deviation", dev, tol)
    return rep


def drift_compensation_check(model, grid, p0, T, tol=1e-2):
    """Centered-measure solve of ``model`` against the Poisson solve of its compensated drift."""
    comp = compensate_drift(model)
    a = solve_forward(comp, grid, p0, T, jump_measure="poisson", store="ends")
    b = solve_forward(model, grid, p0, T, jump_measure="centered", store="ends")
    l1 = float(grid.integrate(np.abs(a.final - b.final)))
    rep = VerificationReport("drift_compensation",
                             config={"poisson": a.scheme, "centered": b.scheme})
    rep.metrics["l1"] = l1
    rep.check("l1", l1, tol)
    return rep
