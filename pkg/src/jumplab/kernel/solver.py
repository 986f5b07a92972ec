"""Explicit solver for the stochastic kernel equation under one noise realization.

Between nodes of the noise grid

    rho <- rho + [ -div(rho a) + 1/2 d_i d_j (rho b b^T)_ij ] dt - d_i(rho b_ik) dw_k

and at a jump node ``rho <- rho(pull-back point) * D-bar`` for the jump's atom.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from dataclasses import field as dc_field

import numpy as np

from ..errors import InstabilityError
from ..fields.grid import GridField, SpatialGrid
from ..fields.operators import DensityOperator, check_time_step, stable_time_step
from ..sde_core.noise import TimeGrid, sample_noise

MASS_TOL = 1e-10
COLLAPSE_MASS = 0.5


@dataclass
class KernelField:
    """Kernel snapshots tied to one noise realization.

    ``boundary_loss[s]`` is the mass that has left through the box faces (or
    was pulled back from outside at jumps) up to snapshot ``s``.
    """

    field: GridField
    noise: object
    boundary_loss: np.ndarray
    scheme: dict = dc_field(default_factory=dict)

    @property
    def grid(self) -> SpatialGrid:
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

    def mass(self):
        return self.field.mass()

    def mass_gap(self):
        """``|mass(t) - 1|`` per snapshot."""
        return np.abs(self.mass() - 1.0)

    def clipped(self):
        """Values with negative undershoots set to zero (reporting only)."""
        return np.maximum(self.values, 0.0)

    def to_csv(self, path, every=1):
        self.field.to_csv(path, every)


def validate_density(grid, values, what="initial density"):
    values = np.asarray(values, dtype=float)
    if values.shape != grid.shape:
        raise ValueError(f"{what} has shape {values.shape}, grid is {grid.shape}")
    if not np.all(np.isfinite(values)):
        raise ValueError(f"{what} has non-finite values")
    if np.any(values < 0):
        raise ValueError(f"{what} must be non-negative")
    mass = float(grid.integrate(values))
    if abs(mass - 1.0) > MASS_TOL:
        raise ValueError(f"{what} has mass {mass:.12g}; normalise to 1 (tolerance {MASS_TOL})")
    return values


def kernel_time_grid(model, grid, T, t0=0.0, safety=1.0):
    """Uniform base time grid whose step satisfies the CFL bound."""
    dt = safety * stable_time_step(model, grid, t0=t0, T=T)
    steps = max(1, math.ceil((T - t0) / dt - 1e-9)) if np.isfinite(dt) else 1
    return TimeGrid.uniform(t0, T, steps)


def kernel_noise(model, grid, T, seed, t0=0.0):
    """Noise realization on a CFL-compliant time grid."""
    return sample_noise(model, kernel_time_grid(model, grid, T, t0), seed)


def solve_kernel_spde(model, grid, rho0, noise, store="all", check_cfl=True):
    """Evolve the kernel density along ``noise``.

    Parameters
    ----------
    model : JumpDiffusionModel
    grid : SpatialGrid
    rho0 : array or GridField
        Non-negative initial density with unit trapezoid mass.
    noise : NoiseRealization
        Its time grid is the solver's time grid; it must satisfy the CFL
        bound (see :func:`kernel_noise`).
    store : ``"all"``, ``"ends"`` or an int stride
        Which node snapshots to keep.  Jump left limits are always kept for
        stored jump nodes.

    Raises
    ------
    CFLError
        Largest noise step exceeds the stability bound.
    InstabilityError
        Mass collapses below 0.5 or values become non-finite.
    """
    if isinstance(rho0, GridField):
        rho0 = rho0.initial
    rho = validate_density(grid, rho0).copy()
    nodes = noise.grid.nodes
    dt = noise.grid.dt
    if check_cfl:
        bound = check_time_step(float(dt.max()), model, grid, t0=nodes[0], T=nodes[-1])
    else:
        bound = stable_time_step(model, grid, t0=nodes[0], T=nodes[-1])
    op = DensityOperator(model, grid)
    jump_of = noise.jump_at_node()
    atoms = noise.jump_atoms
    vol = grid.cell_volume
    steps = nodes.size - 1
    if store == "all":
        keep = set(range(steps + 1))
    elif store == "ends":
        keep = {0, steps}
    else:
        keep = set(range(0, steps + 1, int(store))) | {steps}

    times, values, losses, lefts = [nodes[0]], [rho.copy()], [0.0], {}
    loss = 0.0
    for i in range(steps):
        t = nodes[i]
        inc = op.drift_diffusion(rho, t) * dt[i] + op.wiener_increment(rho, t, noise.dw[:, i])
        loss -= float(inc.sum()) * vol
        rho = rho + inc
        j = jump_of.get(i + 1)
        if j is not None:
            before = float(rho.sum()) * vol
            left = rho
            rho = op.apply_jump(rho, nodes[i + 1], int(atoms[j]))
            loss += before - float(rho.sum()) * vol
            if i + 1 in keep:
                lefts[len(times)] = left
        if not np.all(np.isfinite(rho)):
            raise InstabilityError(f"non-finite kernel values at step {i} (t={nodes[i + 1]:.6g})")
        if grid.integrate(rho) < COLLAPSE_MASS:
            raise InstabilityError(
                f"kernel mass collapsed to {float(grid.integrate(rho)):.3g} at step {i} "
                f"(t={nodes[i + 1]:.6g})")
        if i + 1 in keep:
            times.append(nodes[i + 1])
            values.append(rho.copy())
            losses.append(loss)
    scheme = {
        "solver": "kernel", "grid": grid.describe(), "steps": steps,
        "dt_max": float(dt.max()), "cfl_bound": float(bound),
        "cfl_margin": float(bound / dt.max()), "noise": noise.describe(),
        "model": model.describe(),
        "advection": "upwind", "diffusion": "central", "wiener_flux": "central",
        "jumps": "cubic pull-back", "boundary": "absorbing",
    }
    gf = GridField(grid, times, np.stack(values), lefts, meta=scheme)
    return KernelField(gf, noise, np.asarray(losses), scheme)
