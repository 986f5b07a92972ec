"""Pointwise evolution of a grid field by a given differential (Q, D, G)."""

from __future__ import annotations

import numpy as np

from ..errors import DivergenceError
from ..fields.grid import GridField


def evolve_field(initial, diff, noise):
    """Explicit update ``u += Q dt + D_k dw_k`` per step, ``+= G`` at jump nodes.

    No spatial coupling: ``Q``, ``D`` and ``G`` are given functions of
    ``(t, x)``, so each grid node evolves on its own.  The field is stored at
    every node of ``noise.grid``; left limits are kept at jump nodes.
    For an autonomous differential the increments do not depend on ``u``
    or ``t``, so the same update is taken as a cumulative sum.
    """
    if getattr(diff, "autonomous", False):
        return _evolve_autonomous(initial, diff, noise)
    grid = initial.grid
    X = grid.x
    u = np.array(initial.final, dtype=float)
    nodes = noise.grid.nodes
    dt = noise.grid.dt
    jump_of = noise.jump_at_node()
    marks = noise.jump_marks
    vals = [u.copy()]
    lefts = {}
    for i in range(nodes.size - 1):
        t = nodes[i]
        D = diff.D(t, X)
        u = u + diff.Q(t, X) * dt[i] + D @ noise.dw[:, i]
        j = jump_of.get(i + 1)
        if j is not None:
            lefts[i + 1] = u.copy()
            u = u + diff.G(nodes[i + 1], X, marks[j])
        if not np.all(np.isfinite(u)):
            raise DivergenceError(f"non-finite field values at step {i} (t={nodes[i + 1]:.6g})",
                                  step=i, time=float(nodes[i + 1]))
        vals.append(u.copy())
    meta = dict(initial.meta)
    meta.update({"noise": noise.describe(), "variant": getattr(diff, "variant", "custom")})
    return GridField(grid, nodes.copy(), np.stack(vals), lefts, meta)


def _evolve_autonomous(initial, diff, noise):
    grid = initial.grid
    X = grid.x
    nodes = noise.grid.nodes
    u0 = np.asarray(initial.final, dtype=float)
    Q = np.asarray(diff.Q(nodes[0], X), dtype=float)
    D = np.asarray(diff.D(nodes[0], X), dtype=float)
    inc = np.zeros((nodes.size,) + u0.shape)
    inc[1:] = Q * noise.grid.dt.reshape((-1,) + (1,) * u0.ndim)
    inc[1:] += np.einsum("...k,ks->s...", D, noise.dw)
    jump_of = noise.jump_at_node()
    G = {k: np.asarray(diff.G(nodes[k], X, noise.jump_marks[j]), dtype=float)
         for k, j in jump_of.items()}
    for k, g in G.items():
        inc[k] += g
    vals = u0 + np.cumsum(inc, axis=0)
    bad = ~np.all(np.isfinite(vals.reshape(nodes.size, -1)), axis=1)
    if np.any(bad):
        i = int(np.argmax(bad)) - 1
        raise DivergenceError(f"non-finite field values at step {i} (t={nodes[i + 1]:.6g})",
                              step=i, time=float(nodes[i + 1]))
    lefts = {k: vals[k] - g for k, g in G.items()}
    meta = dict(initial.meta)
    meta.update({"noise": noise.describe(), "variant": getattr(diff, "variant", "custom")})
    return GridField(grid, nodes.copy(), vals, lefts, meta)
