"""Built-in model families.

Every builder returns a :class:`JumpDiffusionModel` with analytic first and
second derivatives.  Marks are given as ``[(mark, rate), ...]``.

=============  ==============================================================
key            coefficients
=============  ==============================================================
additive       a = const vector, b = const matrix, g = mark (vector)
geometric      a = alpha x, b = sigma diag(x), g = c x with scalar mark c
ou_jump        a = -theta x, b = sigma I, g = mark
pure_jump      a = 0, b = 0, g = mark (or mark * x when multiplicative)
rotation2d     a = omega (-x2, x1), b = eps I, g = mark
=============  ==============================================================
"""

from __future__ import annotations

import numpy as np

from ..errors import InvalidModelError
from .models import JumpDiffusionModel, MarkMeasure


def _marks(marks, dim):
    if marks is None:
        return MarkMeasure.empty(dim)
    if isinstance(marks, MarkMeasure):
        return marks
    atoms = []
    for mark, rate in marks:
        mark = np.atleast_1d(np.asarray(mark, dtype=float))
        if mark.size == 1 and dim > 1:
            mark = np.full(dim, mark[0])
        atoms.append((mark, rate))
    if not atoms:
        return MarkMeasure.empty(dim)
    return MarkMeasure.from_atoms(atoms)


def _tile(v, shape):
    """Writable copy of ``v`` broadcast to ``shape``."""
    out = np.empty(shape)
    out[...] = v
    return out


def _zeros_like_batch(x, *tail):
    return np.zeros(np.shape(x)[:-1] + tail)


def _additive_jump(n):
    def jump(t, x, mark):
        return _tile(np.asarray(mark, dtype=float), np.shape(x))

    def jump_jac(t, x, mark):
        return _zeros_like_batch(x, n, n)

    return jump, jump_jac


def additive(a=0.3, b=0.5, marks=((0.5, 1.0),), n=1):
    """Constant drift and diffusion, constant-mark jumps."""
    a = np.atleast_1d(np.asarray(a, dtype=float))
    if a.size == 1:
        a = np.full(n, a[0])
    n = a.size
    b = np.asarray(b, dtype=float)
    if b.ndim == 0:
        b = b * np.eye(n)
    elif b.ndim == 1:
        b = b.reshape(n, -1)
    m = b.shape[1]
    mm = _marks(marks, n)
    jump, jump_jac = _additive_jump(n)
    return JumpDiffusionModel(
        n=n, m=m,
        drift=lambda t, x: _tile(a, np.shape(x)),
        diffusion=lambda t, x: _tile(b, np.shape(x)[:-1] + b.shape),
        jump=jump if len(mm) else None,
        marks=mm,
        drift_jac=lambda t, x: _zeros_like_batch(x, n, n),
        diffusion_jac=lambda t, x: _zeros_like_batch(x, n, m, n),
        jump_jac=jump_jac if len(mm) else None,
        diffusion_hess=lambda t, x: _zeros_like_batch(x, n, m, n, n),
        name="additive",
        params={"a": a.tolist(), "b": b.tolist()},
        time_homogeneous=True,
    )


def geometric(alpha=0.1, sigma=0.3, marks=((0.2, 1.0), (-0.1, 1.0)), n=1):
    """Componentwise geometric jump diffusion; one Wiener process per component."""
    alpha = float(alpha)
    sigma = float(sigma)
    mm = _marks(marks, 1)
    if len(mm) and np.any(mm.marks[:, 0] <= -1.0):
        raise InvalidModelError("geometric jump factors need c > -1")
    eye = np.eye(n)

    def diffusion(t, x):
        return sigma * x[..., :, None] * eye

    def diffusion_jac(t, x):
        # d(sigma x_i delta_ik)/dx_j = sigma delta_ik delta_ij
        d = np.zeros((n, n, n))
        for i in range(n):
            d[i, i, i] = sigma
        return _tile(d, np.shape(x)[:-1] + d.shape)

    def jump(t, x, mark):
        return float(np.ravel(mark)[0]) * x

    def jump_jac(t, x, mark):
        c = float(np.ravel(mark)[0])
        return _tile(c * eye, np.shape(x)[:-1] + (n, n))

    return JumpDiffusionModel(
        n=n, m=n,
        drift=lambda t, x: alpha * x,
        diffusion=diffusion,
        jump=jump if len(mm) else None,
        marks=mm,
        drift_jac=lambda t, x: _tile(alpha * eye, np.shape(x)[:-1] + (n, n)),
        diffusion_jac=diffusion_jac,
        jump_jac=jump_jac if len(mm) else None,
        diffusion_hess=lambda t, x: _zeros_like_batch(x, n, n, n, n),
        name="geometric",
        params={"alpha": alpha, "sigma": sigma},
        time_homogeneous=True,
    )


def ou_jump(theta=1.0, sigma=0.5, marks=((0.6, 1.0), (-0.4, 0.5)), n=1):
    """Ornstein-Uhlenbeck process with additive jumps."""
    theta = float(theta)
    sigma = float(sigma)
    mm = _marks(marks, n)
    eye = np.eye(n)
    jump, jump_jac = _additive_jump(n)
    return JumpDiffusionModel(
        n=n, m=n,
        drift=lambda t, x: -theta * x,
        diffusion=lambda t, x: _tile(sigma * eye, np.shape(x)[:-1] + (n, n)),
        jump=jump if len(mm) else None,
        marks=mm,
        drift_jac=lambda t, x: _tile(-theta * eye, np.shape(x)[:-1] + (n, n)),
        diffusion_jac=lambda t, x: _zeros_like_batch(x, n, n, n),
        jump_jac=jump_jac if len(mm) else None,
        diffusion_hess=lambda t, x: _zeros_like_batch(x, n, n, n, n),
        name="ou_jump",
        params={"theta": theta, "sigma": sigma},
        time_homogeneous=True,
    )


def pure_jump(marks=((1.0, 1.0),), multiplicative=False, n=1):
    """No drift, no diffusion; jumps ``g = mark`` or ``g = mark * x``."""
    mm = _marks(marks, 1 if multiplicative else n)
    if not len(mm):
        raise InvalidModelError("pure_jump needs at least one atom")
    eye = np.eye(n)
    if multiplicative:
        if np.any(mm.marks[:, 0] <= -1.0):
            raise InvalidModelError("multiplicative jump factors need c > -1")

        def jump(t, x, mark):
            return float(np.ravel(mark)[0]) * x

        def jump_jac(t, x, mark):
            return _tile(float(np.ravel(mark)[0]) * eye, np.shape(x)[:-1] + (n, n))
    else:
        jump, jump_jac = _additive_jump(n)
    return JumpDiffusionModel(
        n=n, m=1,
        drift=lambda t, x: np.zeros_like(x, dtype=float),
        diffusion=lambda t, x: _zeros_like_batch(x, n, 1),
        jump=jump,
        marks=mm,
        drift_jac=lambda t, x: _zeros_like_batch(x, n, n),
        diffusion_jac=lambda t, x: _zeros_like_batch(x, n, 1, n),
        jump_jac=jump_jac,
        diffusion_hess=lambda t, x: _zeros_like_batch(x, n, 1, n, n),
        name="pure_jump",
        params={"multiplicative": bool(multiplicative)},
        time_homogeneous=True,
    )


def rotation2d(omega=1.0, noise=0.0, marks=None):
    """Rigid rotation in the plane with optional isotropic additive noise."""
    omega = float(omega)
    noise = float(noise)
    mm = _marks(marks, 2)
    rot = np.array([[0.0, -omega], [omega, 0.0]])
    jump, jump_jac = _additive_jump(2)
    return JumpDiffusionModel(
        n=2, m=2,
        drift=lambda t, x: x @ rot.T,
        diffusion=lambda t, x: _tile(noise * np.eye(2), np.shape(x)[:-1] + (2, 2)),
        jump=jump if len(mm) else None,
        marks=mm,
        drift_jac=lambda t, x: _tile(rot, np.shape(x)[:-1] + (2, 2)),
        diffusion_jac=lambda t, x: _zeros_like_batch(x, 2, 2, 2),
        jump_jac=jump_jac if len(mm) else None,
        diffusion_hess=lambda t, x: _zeros_like_batch(x, 2, 2, 2, 2),
        name="rotation2d",
        params={"omega": omega, "noise": noise},
        time_homogeneous=True,
    )


REGISTRY = {
    "additive": additive,
    "geometric": geometric,
    "ou_jump": ou_jump,
    "pure_jump": pure_jump,
    "rotation2d": rotation2d,
}


def make_model(key, **params):
    try:
        builder = REGISTRY[key]
    except KeyError:
        raise InvalidModelError(
            f"unknown model '{key}'; choose from {sorted(REGISTRY)}") from None
    return builder(**params)
