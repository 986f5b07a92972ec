"""Cubic interpolation of grid fields at arbitrary points."""

from __future__ import annotations

import numpy as np
from scipy import ndimage

# absorbing fields: zero outside the box; backward fields: clamp to the edge value
ABSORBING = "grid-constant"
CLAMPED = "nearest"


def cubic_at(values, grid, points, mode=ABSORBING):
    """Cubic B-spline interpolation of ``values`` (spatial axes only) at ``points``."""
    coords = np.moveaxis(grid.index_coords(points), -1, 0)
    out = ndimage.map_coordinates(np.asarray(values, dtype=float), coords, order=3,
                                  mode=mode, cval=0.0, prefilter=True)
    if mode == ABSORBING:
        # the prefiltered spline has tails past the edge; absorbing means exactly zero there
        out = np.where(grid.contains(points), out, 0.0)
    return out


class CubicSampler:
    """Repeated cubic sampling of fields on ``grid`` at a fixed set of points.

    On 1-D grids the sampling is linear in the field values, so the weights
    are assembled once into a dense matrix and each application is a matvec
    that also handles leading batch axes.  2-D grids call the interpolator
    per field.
    """

    def __init__(self, grid, points, mode=ABSORBING):
        self.grid = grid
        self.points = np.asarray(points, dtype=float)
        self.mode = mode
        self.matrix = None
        if grid.n == 1:
            N = grid.points
            cols = [cubic_at(np.eye(N)[j], grid, self.points, mode).ravel() for j in range(N)]
            self.matrix = np.stack(cols, axis=1)

    def __call__(self, values):
        values = np.asarray(values, dtype=float)
        g = self.grid
        if self.matrix is not None:
            flat = values.reshape(values.shape[:values.ndim - 1] + (-1,))
            out = flat @ self.matrix.T
            return out.reshape(values.shape[:values.ndim - 1] + self.points.shape[:-1])
        lead = values.shape[:values.ndim - g.n]
        flat = values.reshape((-1,) + g.shape)
        res = np.stack([cubic_at(f, g, self.points, self.mode) for f in flat])
        return res.reshape(lead + self.points.shape[:-1])


def local_cubic(stack, grid, points):
    """Four-point Lagrange cubic through the nodes around each point.

    ``stack[p]`` is the field paired with ``points[p]``.  Returns value,
    gradient ``(P, n)``, Hessian ``(P, n, n)`` and an interpolation-error
    estimate (spread between the two neighbouring stencils).
    """
    stack = np.asarray(stack, dtype=float)
    pts = np.asarray(points, dtype=float).reshape(-1, grid.n)
    P = pts.shape[0]
    n = grid.n
    N = grid.points
    s = grid.index_coords(pts)
    base = np.clip(np.floor(s).astype(int) - 1, 0, N - 4)

    def weights(u, first):
        # Lagrange basis on nodes first..first+3 evaluated at fractional index u
        k = np.arange(4)
        nodes = first[:, None] + k[None, :]
        w = np.ones((u.size, 4))
        dw = np.zeros((u.size, 4))
        d2w = np.zeros((u.size, 4))
        for a in range(4):
            others = [b for b in range(4) if b != a]
            denom = np.prod([a - b for b in others])
            terms = [u - nodes[:, b] for b in others]
            w[:, a] = terms[0] * terms[1] * terms[2] / denom
            dw[:, a] = (terms[1] * terms[2] + terms[0] * terms[2] + terms[0] * terms[1]) / denom
            d2w[:, a] = 2.0 * (terms[0] + terms[1] + terms[2]) / denom
        return w, dw, d2w

    rows = np.arange(P)
    if n == 1:
        w, dw, d2w = weights(s[:, 0], base[:, 0])
        idx = base[:, 0][:, None] + np.arange(4)[None, :]
        f = stack.reshape(P, N)[rows[:, None], idx]
        h = grid.dx[0]
        val = np.sum(w * f, axis=1)
        grad = (np.sum(dw * f, axis=1) / h)[:, None]
        hess = (np.sum(d2w * f, axis=1) / h ** 2)[:, None, None]
        alt = np.clip(base[:, 0] + np.where(s[:, 0] - base[:, 0] - 1 < 0.5, -1, 1), 0, N - 4)
        w2, _, _ = weights(s[:, 0], alt)
        f2 = stack.reshape(P, N)[rows[:, None], alt[:, None] + np.arange(4)[None, :]]
        err = np.abs(np.sum(w2 * f2, axis=1) - val)
        return val, grad, hess, err

    wx, dwx, d2wx = weights(s[:, 0], base[:, 0])
    wy, dwy, d2wy = weights(s[:, 1], base[:, 1])
    ix = base[:, 0][:, None] + np.arange(4)[None, :]
    iy = base[:, 1][:, None] + np.arange(4)[None, :]
    f = stack.reshape(P, N, N)[rows[:, None, None], ix[:, :, None], iy[:, None, :]]
    hx, hy = grid.dx
    val = np.einsum("pa,pb,pab->p", wx, wy, f)
    gx = np.einsum("pa,pb,pab->p", dwx, wy, f) / hx
    gy = np.einsum("pa,pb,pab->p", wx, dwy, f) / hy
    hxx = np.einsum("pa,pb,pab->p", d2wx, wy, f) / hx ** 2
    hyy = np.einsum("pa,pb,pab->p", wx, d2wy, f) / hy ** 2
    hxy = np.einsum("pa,pb,pab->p", dwx, dwy, f) / (hx * hy)
    grad = np.stack([gx, gy], axis=1)
    hess = np.stack([np.stack([hxx, hxy], 1), np.stack([hxy, hyy], 1)], 1)
    altx = np.clip(base[:, 0] + np.where(s[:, 0] - base[:, 0] - 1 < 0.5, -1, 1), 0, N - 4)
    w2, _, _ = weights(s[:, 0], altx)
    f2 = stack.reshape(P, N, N)[rows[:, None, None],
                                (altx[:, None] + np.arange(4))[:, :, None], iy[:, None, :]]
    err = np.abs(np.einsum("pa,pb,pab->p", w2, wy, f2) - val)
    return val, grad, hess, err
