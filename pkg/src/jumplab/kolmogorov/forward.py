"""Forward (density) equation with the Poisson or the centered jump measure.

Poisson form::

    dp/dt = -div(p a) + 1/2 d_i d_j (p bb^T)_ij + sum_j rate_j [p(pull-back_j) D-bar_j - p]

The centered form treats the model as driven by the compensated measure, so
its jump part adds the transport term ``+div(p sum_j rate_j g_j)``.  That
term is assembled here from the marks and folded into the upwinded face
velocity; it is the Poisson form of the model with drift
``a - sum_j rate_j g_j``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from dataclasses import field as dc_field

import numpy as np

from ..errors import CFLError, InstabilityError
from ..fields.grid import GridField
from ..fields.operators import DensityOperator, stable_time_step
from ..kernel.solver import COLLAPSE_MASS, validate_density

MEASURES = ("poisson", "centered")


@dataclass
class DensityField:
    """Deterministic density snapshots with the tracked boundary loss."""

    field: GridField
    boundary_loss: np.ndarray
    scheme: dict = dc_field(default_factory=dict)

    @property
    def grid(self):
        return self.field.grid

    @property
    def times(self):
        return self.field.times

    @property
    def values(self):
        return self.field.values

    @property
    def final(self):
        return self.field.final

    def at(self, t):
        return self.field.values[self.field.snapshot_index(t)]

    def mass(self):
        return self.field.mass()

    def to_csv(self, path, every=1):
        self.field.to_csv(path, every)


def compensator_velocity(model):
    """``-sum_j rate_j g(t, x, gamma_j)``: the transport added by the centered form."""
    rates = model.marks.rates
    marks = model.marks.marks

    def velocity(t, x):
        out = np.zeros(np.shape(x))
        for rate, mark in zip(rates, marks):
            out -= rate * model.g(t, x, mark)
        return out

    return velocity


def plan_steps(model, grid, t0, T, dt=None, steps=None, extra_velocity=None, check_cfl=True):
    """Uniform step count on ``[t0, T]`` honouring the CFL bound.

    Returns ``(steps, h, bound)``.  An explicit ``dt`` or ``steps`` above the
    bound raises :class:`CFLError` carrying the admissible step.
    """
    bound = stable_time_step(model, grid, t0=t0, T=T, extra_velocity=extra_velocity)
    span = T - t0
    if steps is None:
        target = bound if dt is None else dt
        steps = max(1, math.ceil(span / target - 1e-9)) if np.isfinite(target) else 1
    h = span / steps
    if check_cfl and h > bound * (1.0 + 1e-9):
        raise CFLError(f"time step {h:.4g} exceeds the CFL bound {bound:.4g}; "
                       f"use dt <= {bound:.4g}", bound)
    return int(steps), h, bound


def _keep_set(store, steps):
    if store == "all":
        return set(range(steps + 1))
    if store == "ends":
        return {0, steps}
    if isinstance(store, int):
        return set(range(0, steps + 1, store)) | {steps}
    # explicit list of step indices
    return set(int(k) for k in store) | {0, steps}


def march_forward(model, grid, p, t0, T, steps, jump_measure="poisson", store="all",
                  collapse=True):
    """Explicit Euler for the forward equation; ``p`` may carry leading batch axes.

    Returns ``(times, values, boundary_loss)`` with the snapshot axis first.
    """
    if jump_measure not in MEASURES:
        raise ValueError(f"jump_measure must be one of {MEASURES}, got {jump_measure!r}")
    extra = compensator_velocity(model) if (jump_measure == "centered" and model.has_jumps) \
        else None
    op = DensityOperator(model, grid, extra_velocity=extra)
    h = (T - t0) / steps
    keep = _keep_set(store, steps)
    vol = grid.cell_volume
    p = np.array(p, dtype=float)
    axes = tuple(range(p.ndim - grid.n, p.ndim))
    times, values, losses = [t0], [p.copy()], [np.zeros(p.shape[:p.ndim - grid.n])]
    loss = np.zeros(p.shape[:p.ndim - grid.n])
    for k in range(steps):
        t = t0 + k * h
        rhs = op.drift_diffusion(p, t)
        if model.has_jumps:
            rhs = rhs + op.integro(p, t)
        inc = h * rhs
        loss = loss - inc.sum(axis=axes) * vol
        p = p + inc
        if not np.all(np.isfinite(p)):
            raise InstabilityError(f"non-finite density at step {k} (t={t + h:.6g})")
        if collapse and np.any(grid.integrate(p) < COLLAPSE_MASS):
            raise InstabilityError(
                f"density mass collapsed to {float(np.min(grid.integrate(p))):.3g} "
                f"at step {k} (t={t + h:.6g})")
        if k + 1 in keep:
            times.append(t0 + (k + 1) * h if k + 1 < steps else T)
            values.append(p.copy())
            losses.append(loss.copy())
    return np.asarray(times), np.stack(values), np.stack(losses)


def solve_forward(model, grid, p0, T, t0=0.0, dt=None, steps=None, jump_measure="poisson",
                  store="all", check_cfl=True):
    """Density at times in ``[t0, T]`` from the unit-mass initial density ``p0``.

    Parameters
    ----------
    jump_measure : ``"poisson"`` or ``"centered"``
        How the model's jump part is read (see module docstring).
    dt, steps : optional
        Override the automatic CFL step; values above the bound raise
        :class:`CFLError`.
    store : ``"all"``, ``"ends"``, int stride or list of step indices
    """
    if isinstance(p0, GridField):
        p0 = p0.initial
    p0 = validate_density(grid, p0)
    extra = compensator_velocity(model) if (jump_measure == "centered" and model.has_jumps) \
        else None
    steps, h, bound = plan_steps(model, grid, t0, T, dt, steps, extra, check_cfl)
    times, values, losses = march_forward(model, grid, p0, t0, T, steps, jump_measure, store)
    scheme = {
        "solver": "forward", "jump_measure": jump_measure, "grid": grid.describe(),
        "t0": t0, "T": T, "steps": steps, "dt": h, "cfl_bound": bound,
        "cfl_margin": bound / h, "model": model.describe(),
        "advection": "upwind", "diffusion": "central", "jumps": "cubic pull-back",
        "boundary": "absorbing",
    }
    return DensityField(GridField(grid, times, values, meta=scheme), losses, scheme)
