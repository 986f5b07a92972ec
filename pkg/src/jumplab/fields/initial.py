"""Initial densities on a grid."""

from __future__ import annotations

import numpy as np


def normalize(grid, values):
    """Scale ``values`` to unit trapezoid mass."""
    values = np.asarray(values, dtype=float)
    mass = grid.integrate(values)
    if not mass > 0:
        raise ValueError("cannot normalise a field with non-positive mass")
    return values / mass


def gaussian_density(grid, mean, cov, exact_mass=True):
    """Gaussian density on the grid nodes, renormalised to unit discrete mass."""
    mean = np.broadcast_to(np.asarray(mean, dtype=float), (grid.n,))
    cov = np.asarray(cov, dtype=float)
    if cov.ndim == 0:
        cov = cov * np.eye(grid.n)
    elif cov.ndim == 1:
        cov = np.diag(cov)
    d = grid.x - mean
    inv = np.linalg.inv(cov)
    q = np.einsum("...i,ij,...j->...", d, inv, d)
    vals = np.exp(-0.5 * q) / np.sqrt((2 * np.pi) ** grid.n * np.linalg.det(cov))
    return normalize(grid, vals) if exact_mass else vals


def mollified_delta(grid, x0):
    """Narrow Gaussian standing in for a point mass; variance ``4 dx^2`` per axis."""
    var = 4.0 * np.asarray(grid.dx) ** 2
    return gaussian_density(grid, x0, np.diag(var))


def mollifier_variance(grid):
    return 4.0 * np.asarray(grid.dx) ** 2
