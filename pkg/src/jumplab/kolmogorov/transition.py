"""Transition densities realised through bins, and the Chapman-type mixing check.

Transition densities are never stored as a four-argument array.  For a
partition of the grid nodes into bins ``B_r``:

* backward family: ``v_r(s, y) = P(x(t) in B_r | x(s) = y)``, the backward
  solution with indicator terminal data;
* forward family: ``q_r(t, x)``, the forward solution started from the
  normalised indicator of ``B_r`` at time ``s``.
"""

from __future__ import annotations

import numpy as np

from ..report import VerificationReport
from .backward import march_backward
from .forward import march_forward, plan_steps, solve_forward


def node_bins(grid, bins):
    """Label array assigning each node to one of ``bins`` contiguous blocks per axis."""
    per_axis = np.minimum((np.arange(grid.points) * bins) // grid.points, bins - 1)
    if grid.n == 1:
        return per_axis
    return per_axis[:, None] * bins + per_axis[None, :]


def bin_indicators(grid, bins):
    labels = node_bins(grid, bins)
    R = int(labels.max()) + 1
    return (labels[None, ...] == np.arange(R).reshape((R,) + (1,) * grid.n)).astype(float)


def bin_weights_mass(grid, values, indicators):
    """Trapezoid mass of ``values`` inside each bin, shape ``(..., R)``."""
    wv = np.asarray(values, dtype=float) * grid.trapezoid_weights()
    lead = wv.shape[:wv.ndim - grid.n]
    return wv.reshape(lead + (-1,)) @ indicators.reshape(indicators.shape[0], -1).T


def transition_backward(model, grid, bins, s, t_end, steps=None, dt=None):
    """``v_r(s, .)`` for every bin, shape ``(R, *grid.shape)``."""
    ind = bin_indicators(grid, bins)
    if s == t_end:
        return ind
    n_steps, _, _ = plan_steps(model, grid, s, t_end, dt, steps)
    _, vals = march_backward(model, grid, ind, s, t_end, n_steps, store="ends")
    return vals[0]


def transition_forward(model, grid, bins, s, t_end, steps=None, dt=None):
    """``q_r(t_end, .)`` for every bin, shape ``(R, *grid.shape)``."""
    ind = bin_indicators(grid, bins)
    q0 = ind / grid.integrate(ind).reshape((-1,) + (1,) * grid.n)
    if s == t_end:
        return q0
    n_steps, _, _ = plan_steps(model, grid, s, t_end, dt, steps)
    _, vals, _ = march_forward(model, grid, q0, s, t_end, n_steps, store="ends", collapse=False)
    return vals[-1]


def chapman_consistency(model, grid, p0, T, s=None, t0=0.0, bins=64, mode="backward"):
    """Gap between ``p(T)`` and the mixture of transition densities over ``p(s)``.

    ``mode="backward"`` compares bin masses: ``sum_r |int_{B_r} p(T) -
    int v_r(s, y) p(s, y) dy|``, which is zero at ``s = T`` by construction.
    ``mode="forward"`` compares densities: ``int |p(T) - sum_r P_s(B_r)
    q_r(T)| dx``, which at ``s = T`` leaves the bin-averaging error.
    """
    if s is None:
        s = 0.5 * (t0 + T)
    if not t0 <= s <= T:
        raise ValueError(f"need t0 <= s <= T, got s={s}")
    # common step so p(s) is a stored snapshot
    steps, h, _ = plan_steps(model, grid, t0, T)
    k_s = int(round((s - t0) / h))
    s = t0 + k_s * h if k_s < steps else T
    fwd = solve_forward(model, grid, p0, T, t0=t0, steps=steps, store=[k_s])
    p_s, p_T = fwd.at(s), fwd.final
    ind = bin_indicators(grid, bins)
    rep = VerificationReport("chapman_consistency",
                             config={"mode": mode, "bins": bins, "s": s, "T": T, "t0": t0,
                                     "steps": steps, "dt": h, "grid": grid.describe(),
                                     "model": model.describe()})
    if mode == "backward":
        v = transition_backward(model, grid, bins, s, T, steps=steps - k_s) if k_s < steps \
            else ind
        lhs = bin_weights_mass(grid, p_T, ind)
        rhs = grid.integrate(v * p_s)
        gap = float(np.sum(np.abs(lhs - rhs)))
    elif mode == "forward":
        q = transition_forward(model, grid, bins, s, T, steps=steps - k_s) if k_s < steps \
            else ind / grid.integrate(ind).reshape((-1,) + (1,) * grid.n)
        P = bin_weights_mass(grid, p_s, ind)
        mix = np.tensordot(P, q, axes=1)
        gap = float(grid.integrate(np.abs(p_T - mix)))
    else:
        raise ValueError(f"mode must be 'backward' or 'forward', got {mode!r}")
    rep.metrics["l1_gap"] = gap
    return rep
