"""Candidate first integrals.

Two representations:

* :class:`CandidateIntegral` -- a deterministic ``u(t, x)`` with derivatives,
  usable by the coefficient builders;
* :class:`NoiseAwareCandidate` -- ``u(t, x; omega)`` written in terms of the
  realized Wiener path and jump record, evaluated along a path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..sde_core.models import FD_STEP, FD_STEP_SECOND, _fd_jacobian

HESSIAN_SYMMETRY_TOL = 1e-8


@dataclass(frozen=True)
class CandidateIntegral:
    """``u(t, x)`` with optional analytic ``du/dt``, gradient and Hessian.

    Missing derivatives are replaced by central differences (gradient step
    ``1e-6 (1 + |x|)``, Hessian step ``1e-4 (1 + |x|)``).  ``autonomous``
    declares that ``u`` does not depend on ``t``.
    """

    func: object
    time_derivative: object = None
    gradient: object = None
    hessian: object = None
    name: str = "u"
    autonomous: bool = False

    def u(self, t, x):
        return np.asarray(self.func(t, np.asarray(x, dtype=float)), dtype=float)

    def du_dt(self, t, x):
        if self.time_derivative is not None:
            return np.asarray(self.time_derivative(t, x), dtype=float)
        h = FD_STEP * (1.0 + abs(t))
        return (self.u(t + h, x) - self.u(t - h, x)) / (2 * h)

    def grad(self, t, x):
        x = np.asarray(x, dtype=float)
        if self.gradient is not None:
            return np.asarray(self.gradient(t, x), dtype=float)
        return _fd_jacobian(lambda z: self.u(t, z)[..., None], x)[..., 0, :]

    def hess(self, t, x):
        x = np.asarray(x, dtype=float)
        if self.hessian is not None:
            return np.asarray(self.hessian(t, x), dtype=float)
        if self.gradient is not None:
            return _fd_jacobian(lambda z: self.grad(t, z), x, FD_STEP_SECOND)
        n = x.shape[-1]
        H = np.empty(x.shape + (n,))
        h = FD_STEP_SECOND * (1.0 + np.abs(x))
        for i in range(n):
            for j in range(n):
                ei = np.zeros(n)
                ej = np.zeros(n)
                ei[i] = 1.0
                ej[j] = 1.0
                hi = h[..., i:i + 1] * ei
                hj = h[..., j:j + 1] * ej
                H[..., i, j] = (self.u(t, x + hi + hj) - self.u(t, x + hi - hj)
                                - self.u(t, x - hi + hj) + self.u(t, x - hi - hj)) / (
                    4 * h[..., i] * h[..., j])
        return H

    @property
    def fd_fallbacks(self):
        out = []
        if self.time_derivative is None:
            out.append("du_dt")
        if self.gradient is None:
            out.append("grad")
        if self.hessian is None:
            out.append("hess")
        return out

    def check(self, n, seed=0, probes=20, box=2.0, t_range=(0.0, 1.0)):
        """Finite values and a symmetric Hessian on random probes."""
        rng = np.random.default_rng(seed)
        x = rng.uniform(-box, box, (probes, n))
        t = rng.uniform(*t_range)
        vals = [self.u(t, x), self.grad(t, x), self.hess(t, x)]
        if not all(np.all(np.isfinite(v)) for v in vals):
            raise ValueError(f"candidate {self.name} is not finite on the probe set")
        H = vals[2]
        asym = float(np.max(np.abs(H - np.swapaxes(H, -1, -2))))
        if asym > HESSIAN_SYMMETRY_TOL * max(1.0, float(np.max(np.abs(H)))):
            raise ValueError(f"candidate {self.name} Hessian asymmetric by {asym:.3g}")
        return True

    def evaluate_path(self, noise, states):
        """``u(t_i, x_i)`` for states recorded at every node of ``noise.grid``."""
        nodes = noise.grid.nodes
        return np.stack([self.u(t, x) for t, x in zip(nodes, states)])


@dataclass(frozen=True)
class NoiseAwareCandidate:
    """``u(t, x; omega)`` along a path.

    ``evaluator(noise, states)`` receives states at every node of
    ``noise.grid`` (shape ``(N + 1, *batch, n)``; post-jump at jump nodes)
    and returns ``u`` at those nodes.
    """

    evaluator: object
    name: str = "u"

    def evaluate_path(self, noise, states):
        return np.asarray(self.evaluator(noise, np.asarray(states)), dtype=float)


def _cum_over_jumps(noise, values, init=0.0, op=np.add):
    """``op``-accumulate per-jump ``values`` onto nodes (inclusive of the jump node)."""
    N = noise.grid.steps
    per_node = np.full((N + 1,) + np.shape(values)[1:], init, dtype=float)
    for k, v in zip(noise.jump_nodes, values):
        per_node[k] = op(per_node[k], v)
    return op.accumulate(per_node, axis=0)


def additive_candidate(model):
    """``u = x - a t - b W(t) - sum of jump marks``."""
    a = np.asarray(model.params["a"], dtype=float)
    b = np.asarray(model.params["b"], dtype=float)

    def ev(noise, states):
        t = noise.grid.nodes - noise.grid.t0
        W = noise.wiener_path().T
        S = _cum_over_jumps(noise, noise.jump_marks, 0.0) if noise.n_jumps else 0.0
        shift = t[:, None] * a + W @ b.T + S
        return states - shift.reshape((shift.shape[0],) + (1,) * (states.ndim - 2)
                                      + (shift.shape[-1],))

    return NoiseAwareCandidate(ev, "x - a t - b W - sum(gamma)")


def pure_jump_candidate(model):
    """``x - sum(gamma)`` (additive) or ``x / prod(1 + c)`` (multiplicative)."""
    mult = bool(model.params.get("multiplicative", False))

    def ev(noise, states):
        n = states.shape[-1]
        N = noise.grid.steps
        if mult:
            P = (_cum_over_jumps(noise, 1.0 + noise.jump_marks, 1.0, np.multiply)
                 if noise.n_jumps else np.ones((N + 1, n)))
            return states / P.reshape((N + 1,) + (1,) * (states.ndim - 2) + (-1,))
        S = (_cum_over_jumps(noise, noise.jump_marks, 0.0) if noise.n_jumps
             else np.zeros((N + 1, n)))
        return states - S.reshape((N + 1,) + (1,) * (states.ndim - 2) + (-1,))

    return NoiseAwareCandidate(ev, "x / prod(1 + c)" if mult else "x - sum(gamma)")


def geometric_candidate(model):
    """``u = x exp(-(alpha - sigma^2/2) t - sigma W) / prod(1 + c)``, componentwise."""
    alpha = float(model.params["alpha"])
    sigma = float(model.params["sigma"])

    def ev(noise, states):
        t = noise.grid.nodes - noise.grid.t0
        W = noise.wiener_path().T
        N = noise.grid.steps
        P = (_cum_over_jumps(noise, 1.0 + noise.jump_marks[:, :1], 1.0, np.multiply)
             if noise.n_jumps else np.ones((N + 1, 1)))
        scale = np.exp(-(alpha - 0.5 * sigma ** 2) * t[:, None] - sigma * W) / P
        return states * scale.reshape((N + 1,) + (1,) * (states.ndim - 2) + (-1,))

    return NoiseAwareCandidate(ev, "x exp(-(alpha - sigma^2/2) t - sigma W) / prod(1 + c)")


def ou_jump_candidate(model):
    """``u = e^{theta t} x - sigma sum e^{theta s_i} dW_i - sum e^{theta tau} gamma``."""
    theta = float(model.params["theta"])
    sigma = float(model.params["sigma"])

    def ev(noise, states):
        nodes = noise.grid.nodes
        t = nodes - noise.grid.t0
        N = noise.grid.steps
        n = states.shape[-1]
        I = np.zeros((N + 1, n))
        I[1:] = np.cumsum(np.exp(theta * t[:-1])[:, None] * noise.dw.T, axis=0)
        if noise.n_jumps:
            jt = noise.jump_times - noise.grid.t0
            J = _cum_over_jumps(noise, np.exp(theta * jt)[:, None] * noise.jump_marks, 0.0)
        else:
            J = np.zeros((N + 1, n))
        shape = (N + 1,) + (1,) * (states.ndim - 2) + (-1,)
        return (np.exp(theta * t).reshape(shape[:-1] + (1,)) * states
                - (sigma * I + J).reshape(shape))

    return NoiseAwareCandidate(ev, "e^(theta t) x - stochastic and jump sums")


def rotation_candidate(model):
    """``u = x1^2 + x2^2`` (an integral of the deterministic rotation)."""
    return CandidateIntegral(
        lambda t, x: np.sum(x ** 2, axis=-1),
        time_derivative=lambda t, x: np.zeros(np.shape(x)[:-1]),
        gradient=lambda t, x: 2.0 * x,
        hessian=lambda t, x: np.broadcast_to(2.0 * np.eye(x.shape[-1]),
                                             x.shape + (x.shape[-1],)).copy(),
        name="x1^2 + x2^2", autonomous=True)


_CANDIDATES = {
    "additive": additive_candidate,
    "pure_jump": pure_jump_candidate,
    "geometric": geometric_candidate,
    "ou_jump": ou_jump_candidate,
    "rotation2d": rotation_candidate,
}


def registry_candidate(model):
    """Analytic first integral for a registry model (keyed by ``model.name``)."""
    try:
        build = _CANDIDATES[model.name]
    except KeyError:
        raise KeyError(f"no built-in candidate for model {model.name!r}; "
                       f"known: {sorted(_CANDIDATES)}") from None
    if model.name == "rotation2d" and (model.params.get("noise", 0.0) or model.has_jumps):
        raise ValueError("x1^2 + x2^2 is a first integral only of the deterministic rotation")
    return build(model)


def identity_candidate():
    """``u = x_1``; not an integral of any model with drift or noise."""
    return CandidateIntegral(
        lambda t, x: x[..., 0],
        time_derivative=lambda t, x: np.zeros(np.shape(x)[:-1]),
        gradient=lambda t, x: np.broadcast_to(np.eye(x.shape[-1])[0], x.shape).copy(),
        hessian=lambda t, x: np.zeros(x.shape + (x.shape[-1],)),
        name="x_1", autonomous=True)
