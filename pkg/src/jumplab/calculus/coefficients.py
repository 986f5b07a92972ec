"""Stochastic differentials ``dF = Q dt + D_k dw_k + G dN`` of random fields.

The builders return the coefficients that make a candidate ``u`` a first
integral:

    Q   = -[ a.grad u + 1/2 b_ik b_jk u_ij - b_ik d_i(b_jk u_j) ]
        = -[ a.grad u - 1/2 b_ik b_jk u_ij - b_ik (d_i b_jk) u_j ]
    D_k = -b_ik u_i
    G   = u(t, x - g(t, x^{-1}(t, x, gamma), gamma)) - u(t, x)

For ``g`` independent of ``x`` the pre-image is ``x - g`` and ``G`` reduces
to ``u(t, x - g(t, gamma)) - u(t, x)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import WrongVariantError
from ..sde_core.jacobian import inverse_jump_map
from ..sde_core.models import _fd_jacobian

XINDEP_PROBE_TOL = 1e-10


@dataclass(frozen=True)
class FieldDifferential:
    """Coefficient callables of a random field's differential.

    ``Q(t, x) -> (...)``, ``D(t, x) -> (..., m)``, ``G(t, x, mark) -> (...)``,
    and optionally ``grad_D(t, x) -> (..., m, n)`` with ``[k, i] = dD_k/dx_i``
    (central differences otherwise).  ``autonomous`` declares that no
    coefficient depends on ``t``, which lets checks evaluate all steps at once.
    """

    Q: object
    D: object
    G: object
    m: int
    grad_D_func: object = None
    variant: str = "custom"
    autonomous: bool = False

    def grad_D(self, t, x):
        x = np.asarray(x, dtype=float)
        if self.grad_D_func is not None:
            return np.asarray(self.grad_D_func(t, x), dtype=float)
        return _fd_jacobian(lambda z: self.D(t, z), x)

    @classmethod
    def constant(cls, Q=0.0, D=0.0, m=1):
        """Spatially constant ``Q`` and ``D`` (scalar or length-``m``), ``G = 0``."""
        Dv = np.broadcast_to(np.asarray(D, dtype=float), (m,))
        return cls(
            Q=lambda t, x: np.full(np.shape(x)[:-1], float(Q)),
            D=lambda t, x: np.broadcast_to(Dv, np.shape(x)[:-1] + (m,)).copy(),
            G=lambda t, x, mark: np.zeros(np.shape(x)[:-1]),
            m=m,
            grad_D_func=lambda t, x: np.zeros(np.shape(x)[:-1] + (m, np.shape(x)[-1])),
            variant="constant",
            autonomous=True,
        )


def _drift_and_noise(u, model):
    def Q(t, x):
        x = np.asarray(x, dtype=float)
        gu = u.grad(t, x)
        H = u.hess(t, x)
        a = model.a(t, x)
        b = model.b(t, x)
        db = model.grad_b(t, x)  # [..., j, k, i] = d b_jk / d x_i
        first = np.einsum("...i,...i->...", a, gu)
        second = np.einsum("...ik,...jk,...ij->...", b, b, H)
        cross = np.einsum("...ik,...jki,...j->...", b, db, gu)
        return -(first - 0.5 * second - cross)

    def D(t, x):
        x = np.asarray(x, dtype=float)
        return -np.einsum("...ik,...i->...k", model.b(t, x), u.grad(t, x))

    def grad_D(t, x):
        # dD_k/dx_l = -(d_l b_ik) u_i - b_ik u_il
        x = np.asarray(x, dtype=float)
        b = model.b(t, x)
        db = model.grad_b(t, x)
        return -(np.einsum("...ikl,...i->...kl", db, u.grad(t, x))
                 + np.einsum("...ik,...il->...kl", b, u.hess(t, x)))

    return Q, D, grad_D


def probe_x_independence(model, seed=0, probes=20, box=2.0, t_range=(0.0, 1.0)):
    """Largest ``|dg/dx|`` over random probes and all atoms."""
    if not model.has_jumps:
        return 0.0
    rng = np.random.default_rng(seed)
    x = rng.uniform(-box, box, (probes, model.n))
    worst = 0.0
    for t in rng.uniform(*t_range, size=3):
        for mark in model.marks.marks:
            worst = max(worst, float(np.max(np.abs(model.grad_g(t, x, mark)))))
    return worst


def first_integral_coeffs_xindep(u, model, probe_seed=0):
    """``(Q, D, G)`` for jump amplitudes that do not depend on ``x``.

    Raises
    ------
    WrongVariantError
        ``dg/dx`` exceeds ``1e-10`` on a probe; use
        :func:`first_integral_coeffs_xdep`.
    """
    worst = probe_x_independence(model, seed=probe_seed)
    if worst > XINDEP_PROBE_TOL:
        raise WrongVariantError(
            f"jump amplitude depends on x (|dg/dx| up to {worst:.3g}); "
            "use first_integral_coeffs_xdep")
    Q, D, grad_D = _drift_and_noise(u, model)

    def G(t, x, mark):
        x = np.asarray(x, dtype=float)
        return u.u(t, x - model.g(t, x, mark)) - u.u(t, x)

    return FieldDifferential(Q, D, G, model.m, grad_D, variant="x-independent",
                             autonomous=bool(model.time_homogeneous and u.autonomous))


def first_integral_coeffs_xdep(u, model):
    """``(Q, D, G)`` for general jump amplitudes, through the inverse jump map."""
    Q, D, grad_D = _drift_and_noise(u, model)

    def G(t, x, mark):
        x = np.asarray(x, dtype=float)
        pre = inverse_jump_map(model, t, x, mark)
        return u.u(t, x - model.g(t, pre, mark)) - u.u(t, x)

    return FieldDifferential(Q, D, G, model.m, grad_D, variant="x-dependent",
                             autonomous=bool(model.time_homogeneous and u.autonomous))
