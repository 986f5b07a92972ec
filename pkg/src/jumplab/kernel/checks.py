"""Pathwise and global invariant checks for kernel solutions."""

from __future__ import annotations

import numpy as np
from scipy.integrate import cumulative_trapezoid

from ..fields.interp import cubic_at
from ..report import VerificationReport
from ..sde_core.paths import simulate_path

DENSITY_THRESHOLD = 1e-4
BOUNDARY_LOSS_FLAG = 1e-3

TEST_FUNCTIONS = {
    "1": lambda x: np.ones(x.shape[:-1]),
    "x": lambda x: x[..., 0],
    "x2": lambda x: np.sum(x ** 2, axis=-1),
    "cos": lambda x: np.cos(x[..., 0]),
}


def sample_density(grid, values, size, rng):
    """Draw points from a non-negative grid density.

    1-D: inverse of the trapezoid CDF (linear between nodes).  2-D: node
    chosen by trapezoid mass, then a uniform jitter within its cell.
    """
    values = np.maximum(np.asarray(values, dtype=float), 0.0)
    if grid.n == 1:
        xs = grid.axes[0]
        cdf = cumulative_trapezoid(values, xs, initial=0.0)
        cdf /= cdf[-1]
        u = rng.uniform(0.0, 1.0, size)
        keep = np.concatenate([[True], np.diff(cdf) > 0])
        return np.interp(u, cdf[keep], xs[keep])[:, None]
    w = (values * grid.trapezoid_weights()).ravel()
    idx = rng.choice(w.size, size=size, p=w / w.sum())
    pts = grid.x.reshape(-1, grid.n)[idx]
    pts = pts + (rng.uniform(-0.5, 0.5, (size, grid.n)) * grid.dx)
    return np.clip(pts, grid.lo, grid.hi)


def check_pathwise_invariant(kernel, traj, jac, threshold=DENSITY_THRESHOLD, exact=None,
                             margin=2):
    """``max |J(t) rho(t, x(t)) - rho(0, x0)|`` over nodes and starting points.

    ``traj`` and ``jac`` may be batched over starting points.  Starting
    points with ``rho(0, x0) <= threshold`` are skipped; paths that come
    within ``margin`` cells of the box edge are excluded and counted.  If
    ``exact(t, x)`` is given, the scheme's own max-norm error against it is
    reported alongside.
    """
    grid = kernel.grid
    if kernel.times.size != traj.nodes.size or np.any(kernel.times != traj.nodes):
        raise ValueError("kernel must be stored at every node of the trajectory's grid")
    states = traj.states.reshape(traj.states.shape[0], -1, grid.n)
    J = jac.values.reshape(jac.values.shape[0], -1)
    rho0_x0 = cubic_at(kernel.values[0], grid, states[0])
    active = rho0_x0 > threshold
    inside = np.all(grid.contains(states, margin), axis=0)
    use = active & inside
    rep = VerificationReport("pathwise_invariant", config=dict(kernel.scheme))
    rep.metrics["starting_points"] = int(states.shape[1])
    rep.metrics["below_threshold"] = int(np.sum(~active))
    rep.metrics["excluded_exits"] = int(np.sum(active & ~inside))
    if np.any(active & ~inside):
        rep.warn(f"{int(np.sum(active & ~inside))} paths left the grid interior and were excluded")
    resid = np.zeros(states.shape[0])
    scheme_err = np.zeros(states.shape[0])
    if np.any(use):
        pts = states[:, use]
        base = rho0_x0[use]
        for i in range(states.shape[0]):
            r = J[i, use] * cubic_at(kernel.values[i], grid, pts[i]) - base
            resid[i] = np.max(np.abs(r))
            if exact is not None:
                scheme_err[i] = np.max(np.abs(kernel.values[i] - exact(kernel.times[i], grid.x)))
    rep.metrics["max_residual"] = float(resid.max())
    rep.metrics["final_residual"] = float(resid[-1])
    if exact is not None:
        rep.metrics["scheme_linf_error"] = float(scheme_err.max())
    rep.add_table("residual", ["t", "residual", "scheme_error"],
                  zip(kernel.times, resid, scheme_err))
    return rep


def check_global_invariants(kernel, model, functions=("1", "x", "x2", "cos"), samples=10_000,
                            seed=0, quad_tol=1e-2, sampler=None):
    """Compare ``int f rho(T)`` with a Monte Carlo mean of ``f(x(T; y))``, ``y ~ rho(0)``.

    The Monte Carlo paths use the kernel's own noise realization.  Each
    function passes if its gap is within ``3`` standard errors plus
    ``quad_tol``.
    """
    grid = kernel.grid
    rng = np.random.default_rng(seed)
    if sampler is None:
        y = sample_density(grid, kernel.values[0], samples, rng)
    else:
        y = np.asarray(sampler(rng, samples), dtype=float).reshape(samples, grid.n)
    traj = simulate_path(model, y, kernel.noise, record="ends")
    xT = traj.final
    rep = VerificationReport("global_invariants", config=dict(kernel.scheme))
    rep.config["samples"] = samples
    rep.config["mc_seed"] = seed
    mass = kernel.mass()
    rep.metrics["mass_gap"] = float(abs(mass[-1] - 1.0))
    rep.metrics["max_mass_gap"] = float(np.max(np.abs(mass - 1.0)))
    rep.metrics["boundary_loss"] = float(kernel.boundary_loss[-1])
    if abs(kernel.boundary_loss[-1]) > BOUNDARY_LOSS_FLAG:
        rep.warn(f"boundary loss {kernel.boundary_loss[-1]:.3g} exceeds {BOUNDARY_LOSS_FLAG}")
    rows = []
    for name in functions:
        f = TEST_FUNCTIONS[name] if isinstance(name, str) else name
        label = name if isinstance(name, str) else getattr(f, "__name__", "f")
        lhs = float(grid.integrate(f(grid.x) * kernel.final))
        fx = f(xT)
        rhs = float(np.mean(fx))
        se = float(np.std(fx, ddof=1) / np.sqrt(samples))
        gap = abs(lhs - rhs)
        rep.metrics[f"gap[{label}]"] = gap
        rep.metrics[f"se[{label}]"] = se
        rep.check(f"gap[{label}]", gap, 3.0 * se + quad_tol)
        rows.append([label, lhs, rhs, gap, se])
    rep.add_table("invariants", ["f", "quadrature", "monte_carlo", "gap", "std_error"], rows)
    return rep
