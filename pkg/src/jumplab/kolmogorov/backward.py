"""Backward equation for transition functionals ``v(s, y) = E[phi(x(t_end)) | x(s) = y]``.

    dv/ds + a.grad v + 1/2 bb^T : hess v + sum_j rate_j [v(s, y + g_j) - v] = 0

integrated backward from ``v(t_end) = phi``.  The jump term samples the
field at the forward-substituted point ``y + g(s, y, gamma)``; unlike the
forward equation no inverse jump map is needed.
"""

from __future__ import annotations

from dataclasses import dataclass
from dataclasses import field as dc_field

import numpy as np

from ..errors import InstabilityError
from ..fields.grid import GridField
from ..fields.operators import GeneratorOperator
from .forward import _keep_set, plan_steps


@dataclass
class BackwardField:
    """Snapshots of ``v(s, .)`` in increasing ``s``; ``field.final`` is the terminal data."""

    field: GridField
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
    def start(self):
        return self.field.values[0]

    def at(self, s):
        return self.field.values[self.field.snapshot_index(s)]

    def to_csv(self, path, every=1):
        self.field.to_csv(path, every)


def terminal_values(grid, phi):
    if callable(phi):
        vals = np.asarray(phi(grid.x), dtype=float)
    else:
        vals = np.asarray(phi, dtype=float)
    if vals.shape[vals.ndim - grid.n:] != grid.shape:
        raise ValueError(f"terminal data has shape {vals.shape}, grid is {grid.shape}")
    if not np.all(np.isfinite(vals)):
        raise ValueError("terminal data must be finite (bounded on the grid)")
    return vals


def march_backward(model, grid, v, s_start, t_end, steps, store="all"):
    """Explicit backward-in-``s`` Euler; ``v`` may carry leading batch axes.

    Returns ``(times, values)`` in increasing ``s`` (snapshot axis first).
    """
    op = GeneratorOperator(model, grid)
    h = (t_end - s_start) / steps
    keep = _keep_set(store, steps)
    v = np.array(v, dtype=float)
    out_t, out_v = [t_end], [v.copy()]
    for k in range(steps):
        s = t_end - k * h
        v = v + h * op.apply(v, s)
        if not np.all(np.isfinite(v)):
            raise InstabilityError(f"non-finite backward values at step {k} (s={s - h:.6g})")
        if k + 1 in keep:
            out_t.append(t_end - (k + 1) * h if k + 1 < steps else s_start)
            out_v.append(v.copy())
    return np.asarray(out_t[::-1]), np.stack(out_v[::-1])


def solve_backward(model, grid, phi, t_end, s_start, dt=None, steps=None, store="all",
                   check_cfl=True):
    """Solve the backward equation on ``[s_start, t_end]``.

    Parameters
    ----------
    phi : callable ``x -> values`` or grid array
        Terminal functional at ``s = t_end``.
    dt, steps : optional
        Override the automatic CFL step.
    """
    if not s_start < t_end:
        raise ValueError(f"need s_start < t_end, got {s_start} >= {t_end}")
    v = terminal_values(grid, phi)
    steps, h, bound = plan_steps(model, grid, s_start, t_end, dt, steps, None, check_cfl)
    times, values = march_backward(model, grid, v, s_start, t_end, steps, store)
    scheme = {
        "solver": "backward", "grid": grid.describe(), "s_start": s_start, "t_end": t_end,
        "steps": steps, "dt": h, "cfl_bound": bound, "cfl_margin": bound / h,
        "model": model.describe(), "advection": "upwind", "diffusion": "central",
        "jumps": "cubic forward substitution", "boundary": "edge-value ghosts",
    }
    return BackwardField(GridField(grid, times, values, meta=scheme), scheme)
