"""Numerical checks of the Itô–Wentzell chain rule and of first-integral conservation."""

from __future__ import annotations

import numpy as np

from ..errors import DivergenceError
from ..fields.grid import GridField
from ..fields.interp import local_cubic
from ..parallel import map_ordered
from ..report import VerificationReport, fit_order
from ..sde_core.noise import refinement_ladder, sample_noise
from ..sde_core.paths import simulate_path
from .evolution import evolve_field


def _per_step(func, times, pts, vectorized):
    """Evaluate ``func(t_i, pts[i])`` for all steps."""
    if vectorized:
        return np.asarray(func(times[0], pts))
    return np.stack([np.asarray(func(t, p)) for t, p in zip(times, pts)])


def _sample(values_per_step, pts, grid):
    """Local cubic of ``values_per_step[i]`` at ``pts[i]`` (``pts`` is ``(S, P, n)``)."""
    S, P, n = pts.shape
    stack = np.repeat(values_per_step, P, axis=0)
    v, g, h, e = local_cubic(stack, grid, pts.reshape(S * P, n))
    return v.reshape(S, P), g.reshape(S, P, n), h.reshape(S, P, n, n), e.reshape(S, P)


def ito_wentzell_residual(diff, field, model, traj, noise, margin=2, table=True):
    """Compare the increment of ``F(t, x(t))`` with the generalized chain rule.

    Per step ``i -> i+1`` (left point ``x_i``, pre-jump state ``x-`` at the
    next node):

    continuous part
        ``F_cont(t_{i+1}, x-) - F(t_i, x_i)`` against
        ``Q dt + D.dw + [a.grad F + 1/2 bb^T : hess F + b_ik dD_k/dx_i] dt
        + b_ik dF/dx_i dw_k`` at ``(t_i, x_i)``
    jump part (jump nodes only)
        ``F(tau, x+) - F_cont(tau, x-)`` against
        ``F_cont(tau, x- + g) - F_cont(tau, x-) + G(tau, x- + g, gamma)``

    ``F_cont`` is the field before the jump update.  Field values and
    derivatives at path points come from local cubic interpolation, whose own
    error estimate is reported separately.  Steps touching the outer
    ``margin`` cells are excluded and counted.
    """
    grid = field.grid
    nodes = noise.grid.nodes
    if field.times.size != nodes.size or not traj.complete:
        raise ValueError("field and trajectory must be stored at every node of the noise grid")
    N = nodes.size - 1
    n = grid.n
    X = traj.states.reshape(N + 1, -1, n)
    P = X.shape[1]
    xm = X[1:].copy()
    for j, k in enumerate(traj.jump_nodes):
        xm[k - 1] = traj.left_limits[j].reshape(P, n)
    F = field.values
    F_left = F[1:].copy()
    for k, v in field.left_limits.items():
        F_left[k - 1] = v

    xi = X[:-1]
    v0, g0, h0, e0 = _sample(F[:-1], xi, grid)
    v1, _, _, e1 = _sample(F_left, xm, grid)
    lhs_cont = v1 - v0

    auto = bool(getattr(diff, "autonomous", False)) and model.time_homogeneous
    t = nodes[:-1]
    dt = noise.grid.dt[:, None]
    dw = noise.dw.T  # (N, m)
    Q = _per_step(diff.Q, t, xi, auto)
    D = _per_step(diff.D, t, xi, auto)
    dD = _per_step(diff.grad_D, t, xi, auto)  # (N, P, m, n)
    a = _per_step(model.a, t, xi, auto)
    b = _per_step(model.b, t, xi, auto)  # (N, P, n, m)
    drift = (np.einsum("spi,spi->sp", a, g0)
             + 0.5 * np.einsum("spik,spjk,spij->sp", b, b, h0)
             + np.einsum("spik,spki->sp", b, dD))
    rhs_cont = (Q * dt + np.einsum("spk,sk->sp", D, dw) + drift * dt
                + np.einsum("spik,spi,sk->sp", b, g0, dw))
    res_cont = lhs_cont - rhs_cont
    interp = e0 + e1

    res_jump = np.zeros((N, P))
    outside = ~grid.contains(xi, margin) | ~grid.contains(xm, margin)
    if traj.jump_nodes.size:
        ks = traj.jump_nodes
        xp = X[ks]
        stack_left = F_left[ks - 1]
        vp, _, _, ep = _sample(F[ks], xp, grid)
        vl_plus, _, _, el = _sample(stack_left, xp, grid)
        vl_minus = v1[ks - 1]
        G = np.stack([np.asarray(diff.G(nodes[k], xp[r], traj.jump_marks[r]))
                      for r, k in enumerate(ks)])
        res_jump[ks - 1] = (vp - vl_minus) - (vl_plus - vl_minus + G)
        interp[ks - 1] += ep + el
        outside[ks - 1] |= ~grid.contains(xp, margin)
    use = ~outside
    rc = np.where(use, res_cont, 0.0)
    rj = np.where(use, res_jump, 0.0)
    total = np.sum(rc + rj, axis=0)

    rep = VerificationReport("ito_wentzell",
                             config={"grid": grid.describe(), "noise": noise.describe(),
                                     "model": model.describe(),
                                     "variant": getattr(diff, "variant", "custom"),
                                     "interpolation": "local cubic", "margin": margin})
    n_out = int(np.sum(outside))
    rep.metrics["steps"] = int(N * P)
    rep.metrics["excluded_steps"] = n_out
    if n_out:
        rep.warn(f"partial coverage: {n_out} of {N * P} steps excluded (path near grid edge)")
    cnt = max(int(np.sum(use)), 1)
    rep.metrics["max_residual_cont"] = float(np.max(np.abs(rc)))
    rep.metrics["rms_residual_cont"] = float(np.sqrt(np.sum(rc ** 2) / cnt))
    rep.metrics["max_residual_jump"] = float(np.max(np.abs(rj))) if rj.size else 0.0
    rep.metrics["total_residual"] = float(np.max(np.abs(total)))
    rep.metrics["interp_error_max"] = float(np.max(np.where(use, interp, 0.0)))
    rep.metrics["jumps"] = int(traj.jump_nodes.size)
    rep.arrays["totals"] = total
    rep.arrays["step_residuals"] = rc + rj
    if table:
        rows = []
        for p in range(P):
            for i in range(N):
                rows.append([noise.seed, nodes[i + 1], rc[i, p], rj[i, p]])
        rep.add_table("residuals", ["seed", "t", "residual_cont", "residual_jump"], rows)
    return rep


def ito_wentzell_study(model, diff, initial, x0, seeds, base_grid, levels=2, threads=1,
                       min_order=None, margin=2):
    """Residuals of :func:`ito_wentzell_residual` under Brownian-bridge refinement.

    For each seed the base noise is refined ``levels`` times; at each level the
    field is evolved and the path simulated on the same realization.  The
    RMS over seeds of the summed residual on ``[t0, T]`` is fitted against the
    step size.
    """
    if isinstance(initial, GridField):
        field0 = initial
    else:
        raise TypeError("initial must be a GridField")

    def one(seed):
        ladder = refinement_ladder(sample_noise(model, base_grid, seed), levels)
        out = []
        for nz in ladder:
            try:
                traj = simulate_path(model, x0, nz)
            except DivergenceError:
                return None
            fld = evolve_field(field0, diff, nz)
            r = ito_wentzell_residual(diff, fld, model, traj, nz, margin, table=False)
            out.append((float(np.abs(r.arrays["totals"]).max()),
                        float(np.sqrt(np.mean(r.arrays["step_residuals"] ** 2))),
                        r.metrics["max_residual_cont"], r.metrics["excluded_steps"],
                        r.metrics["interp_error_max"]))
        return out

    results = map_ordered(one, list(seeds), threads)
    ok = [r for r in results if r is not None]
    dts = [base_grid.base_dt / 2 ** l for l in range(levels + 1)]
    rep = VerificationReport("ito_wentzell_study",
                             config={"model": model.describe(), "seeds": len(list(seeds)),
                                     "base_dt": base_grid.base_dt, "levels": levels,
                                     "variant": getattr(diff, "variant", "custom")})
    rep.metrics["skipped_seeds"] = len(results) - len(ok)
    arr = np.array(ok)  # (seeds, levels, 5)
    rms_total = np.sqrt(np.mean(arr[:, :, 0] ** 2, axis=0))
    rms_step = np.sqrt(np.mean(arr[:, :, 1] ** 2, axis=0))
    for l, h in enumerate(dts):
        rep.metrics[f"rms_total[dt={h:.4g}]"] = float(rms_total[l])
        rep.metrics[f"rms_step[dt={h:.4g}]"] = float(rms_step[l])
        rep.metrics[f"max_step[dt={h:.4g}]"] = float(arr[:, l, 2].max())
    rep.metrics["excluded_steps"] = int(arr[:, :, 3].sum())
    rep.metrics["interp_error_max"] = float(arr[:, :, 4].max())
    rep.metrics["order_total"] = fit_order(dts, rms_total)
    rep.metrics["order_step"] = fit_order(dts, rms_step)
    if rep.metrics["excluded_steps"]:
        rep.warn(f"partial coverage: {rep.metrics['excluded_steps']} steps excluded")
    if min_order is not None:
        rep.check("order_total", rep.metrics["order_total"], min_order, ">=")
    rep.add_table("convergence", ["dt", "rms_total", "rms_step"], zip(dts, rms_total, rms_step))
    return rep


def verify_first_integral(u, model, seeds, grid, x0, refinements=0, threads=1, tol=None,
                          min_order=None):
    """Pathwise drift ``sup_t |u(t, x(t; x0)) - u(0, x0)|`` over seeds and refinements.

    Parameters
    ----------
    u : CandidateIntegral or NoiseAwareCandidate
    seeds : iterable of int
    grid : TimeGrid
        Base grid; each refinement halves its step by Brownian-bridge
        subdivision with jumps held fixed.
    tol : float, optional
        Adds the check ``max drift <= tol`` (over every level).
    min_order : float, optional
        Adds the check ``fitted order of RMS drift >= min_order``.  The
        order of the mean drift is reported alongside without a check.
    """
    seeds = list(seeds)
    x0 = np.asarray(x0, dtype=float)

    def one(seed):
        ladder = refinement_ladder(sample_noise(model, grid, seed), refinements)
        drifts = []
        for nz in ladder:
            try:
                traj = simulate_path(model, x0, nz)
            except DivergenceError:
                return None
            vals = u.evaluate_path(nz, traj.states)
            drifts.append(float(np.max(np.abs(vals - vals[0]))))
        return drifts

    results = map_ordered(one, seeds, threads)
    dts = [grid.base_dt / 2 ** l for l in range(refinements + 1)]
    rep = VerificationReport("first_integral",
                             config={"model": model.describe(), "candidate": u.name,
                                     "seeds": len(seeds), "base_dt": grid.base_dt,
                                     "refinements": refinements, "x0": x0.tolist(),
                                     "fd_fallbacks": getattr(u, "fd_fallbacks", [])})
    ok = [(s, r) for s, r in zip(seeds, results) if r is not None]
    rep.metrics["skipped_seeds"] = len(seeds) - len(ok)
    if rep.metrics["skipped_seeds"]:
        rep.warn(f"{rep.metrics['skipped_seeds']} seeds diverged and were skipped")
    if not ok:
        rep.check("usable_seeds", 0, 1, ">=")
        return rep
    arr = np.array([r for _, r in ok])
    rms = np.sqrt(np.mean(arr ** 2, axis=0))
    for l, h in enumerate(dts):
        rep.metrics[f"max_drift[dt={h:.4g}]"] = float(arr[:, l].max())
        rep.metrics[f"rms_drift[dt={h:.4g}]"] = float(rms[l])
    rep.metrics["max_drift"] = float(arr.max())
    rep.metrics["finest_max_drift"] = float(arr[:, -1].max())
    rep.metrics["finest_rms_drift"] = float(rms[-1])
    if refinements:
        rep.metrics["order"] = fit_order(dts, rms)
        rep.metrics["order_mean_drift"] = fit_order(dts, arr.mean(axis=0))
    if tol is not None:
        rep.check("max_drift", rep.metrics["max_drift"], tol)
    if min_order is not None:
        rep.check("order", rep.metrics.get("order", float("nan")), min_order, ">=")
    rep.add_table("drift", ["seed", "dt", "drift"],
                  [[s, dts[l], r[l]] for s, r in ok for l in range(len(dts))])
    return rep
