"""Finite-difference operators for the density-type equations.

Forward (density / kernel) operators are written in flux form on cell
faces with zero ghost values, so the discrete mass changes only through the
outer faces: an absorbing boundary whose leakage is exactly measurable.

    drift        -d(rho a_i)/dx_i                 first-order upwind
    diffusion    1/2 d2(rho (b b^T)_ij)/dx_i dx_j  central
    Wiener flux  -d(rho b_ik)/dx_i dw_k           central
    jumps        rho(pull-back point) * D-bar     cubic interpolation

The backward (generator) operator is non-conservative, upwinded along the
drift, with edge-value ghosts so constants are preserved exactly.

Arrays carry optional leading batch axes; the last ``grid.n`` axes are
spatial.
"""

from __future__ import annotations

import numpy as np

from ..errors import CFLError
from ..sde_core.jacobian import pull_back
from .interp import ABSORBING, CLAMPED, CubicSampler


def _pad(q, ax, mode):
    width = [(0, 0)] * q.ndim
    width[ax] = (1, 1)
    return np.pad(q, width, mode="constant" if mode == "zero" else "edge")


def _take(q, ax, sl):
    idx = [slice(None)] * q.ndim
    idx[ax] = sl
    return q[tuple(idx)]


def face_average(q, ax):
    p = _pad(q, ax, "zero")
    return 0.5 * (_take(p, ax, slice(None, -1)) + _take(p, ax, slice(1, None)))


def face_difference(q, ax, h):
    p = _pad(q, ax, "zero")
    return (_take(p, ax, slice(1, None)) - _take(p, ax, slice(None, -1))) / h


def central(q, ax, h, mode="zero"):
    p = _pad(q, ax, mode)
    return (_take(p, ax, slice(2, None)) - _take(p, ax, slice(None, -2))) / (2.0 * h)


def divergence(flux, ax, h):
    return (_take(flux, ax, slice(1, None)) - _take(flux, ax, slice(None, -1))) / h


def _spatial_axis(arr, grid, d):
    return arr.ndim - grid.n + d


def stable_time_step(model, grid, t0=0.0, T=None, include_jumps=True, samples=5,
                     extra_velocity=None):
    """Largest explicit step allowed by the CFL rules.

    ``min(dx^2 / (2 n max|bb^T|), dx / (2 n max|a|), 0.1 / total_rate)``;
    the ``1/n`` factor keeps the summed per-axis bounds below one in 2-D.
    """
    X = grid.x
    times = [t0] if (model.time_homogeneous or T is None) else np.linspace(t0, T, samples)
    h = float(np.min(grid.dx))
    n = grid.n
    bounds = []
    amax = 0.0
    cmax = 0.0
    for t in times:
        a = model.a(t, X)
        if extra_velocity is not None:
            a = a + extra_velocity(t, X)
        amax = max(amax, float(np.max(np.abs(a))))
        b = model.b(t, X)
        c = np.einsum("...ik,...jk->...ij", b, b)
        if c.size:
            cmax = max(cmax, float(np.max(np.linalg.norm(c, ord=2, axis=(-2, -1)))))
    if cmax > 0:
        bounds.append(h * h / (2.0 * n * cmax))
    if amax > 0:
        bounds.append(h / (2.0 * n * amax))
    if include_jumps and model.has_jumps:
        bounds.append(0.1 / model.marks.total_rate)
    return min(bounds) if bounds else np.inf


def check_time_step(dt_max, model, grid, **kw):
    need = stable_time_step(model, grid, **kw)
    if dt_max > need * (1.0 + 1e-9):
        raise CFLError(f"time step {dt_max:.4g} exceeds the CFL bound {need:.4g}; "
                       f"use dt <= {need:.4g}", need)
    return need


class DensityOperator:
    """Spatial part of the forward (density) and kernel equations."""

    def __init__(self, model, grid, extra_velocity=None):
        if model.n != grid.n:
            raise ValueError(f"model dimension {model.n} != grid dimension {grid.n}")
        self.model = model
        self.grid = grid
        self.extra_velocity = extra_velocity
        self._cache = {}
        self._jump_cache = {}
        self._x = grid.x

    def _coeffs(self, t):
        key = 0.0 if self.model.time_homogeneous else float(t)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        g, m = self.grid, self.model
        vel = []
        for d in range(g.n):
            xf = g.faces(d)
            a = m.a(t, xf)
            if self.extra_velocity is not None:
                a = a + self.extra_velocity(t, xf)
            vel.append(a[..., d])
        b = m.b(t, self._x)
        c = np.einsum("...ik,...jk->...ij", b, b)
        out = (vel, b, c)
        if m.time_homogeneous:
            self._cache = {key: out}
        return out

    def drift_diffusion(self, rho, t):
        vel, _, c = self._coeffs(t)
        g = self.grid
        out = np.zeros_like(rho)
        for d in range(g.n):
            ax = _spatial_axis(rho, g, d)
            h = g.dx[d]
            p = _pad(rho, ax, "zero")
            left = _take(p, ax, slice(None, -1))
            right = _take(p, ax, slice(1, None))
            v = vel[d]
            flux = np.maximum(v, 0.0) * left + np.minimum(v, 0.0) * right
            # diffusive flux 1/2 sum_j d_j (rho C_dj) at faces normal to d
            for e in range(g.n):
                M = rho * c[..., d, e]
                if not np.any(c[..., d, e]):
                    continue
                if e == d:
                    flux = flux - 0.5 * face_difference(M, ax, h)
                else:
                    axe = _spatial_axis(rho, g, e)
                    flux = flux - 0.5 * face_average(central(M, axe, g.dx[e]), ax)
            out -= divergence(flux, ax, h)
        return out

    def wiener_increment(self, rho, t, dw):
        _, b, _ = self._coeffs(t)
        g = self.grid
        out = np.zeros_like(rho)
        for k in range(b.shape[-1]):
            if dw[k] == 0.0:
                continue
            for d in range(g.n):
                q = rho * b[..., d, k]
                if not np.any(b[..., d, k]):
                    continue
                ax = _spatial_axis(rho, g, d)
                out -= divergence(face_average(q, ax), ax, g.dx[d]) * dw[k]
        return out

    def jump_map(self, t, atom):
        """Sampler at the pull-back points of atom ``atom`` and its D-bar weights."""
        key = (0.0 if self.model.time_homogeneous else float(t), atom)
        hit = self._jump_cache.get(key)
        if hit is None:
            src, d_bar = pull_back(self.model, t, self._x, self.model.marks.marks[atom])
            hit = (CubicSampler(self.grid, src, ABSORBING), d_bar)
            if self.model.time_homogeneous:
                self._jump_cache[key] = hit
        return hit

    def apply_jump(self, rho, t, atom):
        sampler, d_bar = self.jump_map(t, atom)
        return sampler(rho) * d_bar

    def integro(self, rho, t):
        """``sum_j rate_j [rho(pull-back_j) D-bar_j - rho]``."""
        out = np.zeros_like(rho)
        for j, rate in enumerate(self.model.marks.rates):
            out += rate * (self.apply_jump(rho, t, j) - rho)
        return out


class GeneratorOperator:
    """Backward operator ``a.grad v + 1/2 bb^T : hess v + sum_j rate_j [v(y + g_j) - v]``."""

    def __init__(self, model, grid):
        if model.n != grid.n:
            raise ValueError(f"model dimension {model.n} != grid dimension {grid.n}")
        self.model = model
        self.grid = grid
        self._x = grid.x
        self._cache = {}

    def _coeffs(self, t):
        key = 0.0 if self.model.time_homogeneous else float(t)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        m = self.model
        a = m.a(t, self._x)
        b = m.b(t, self._x)
        c = np.einsum("...ik,...jk->...ij", b, b)
        samplers = []
        for j, mark in enumerate(m.marks.marks):
            target = self._x + m.g(t, self._x, mark)
            samplers.append(CubicSampler(self.grid, target, CLAMPED))
        out = (a, c, samplers)
        if m.time_homogeneous:
            self._cache = {key: out}
        return out

    def apply(self, v, t):
        a, c, samplers = self._coeffs(t)
        g = self.grid
        out = np.zeros_like(v)
        for d in range(g.n):
            ax = _spatial_axis(v, g, d)
            h = g.dx[d]
            p = _pad(v, ax, "edge")
            fwd = (_take(p, ax, slice(2, None)) - _take(v, ax, slice(None))) / h
            bwd = (v - _take(p, ax, slice(None, -2))) / h
            ad = a[..., d]
            out += np.maximum(ad, 0.0) * fwd + np.minimum(ad, 0.0) * bwd
            for e in range(g.n):
                cde = c[..., d, e]
                if not np.any(cde):
                    continue
                if e == d:
                    second = (_take(p, ax, slice(2, None)) - 2.0 * v
                              + _take(p, ax, slice(None, -2))) / (h * h)
                else:
                    axe = _spatial_axis(v, g, e)
                    second = central(central(v, ax, h, "edge"), axe, g.dx[e], "edge")
                out += 0.5 * cde * second
        for rate, sampler in zip(self.model.marks.rates, samplers):
            out += rate * (sampler(v) - v)
        return out
