"""Jump-diffusion model containers.

A model bundles the drift ``a(t, x)``, the diffusion matrix ``b(t, x)`` and
the jump amplitude ``g(t, x, mark)`` together with a finite mark measure.
All callables are batched: ``x`` carries any number of leading axes and the
state on the last axis, so the same model drives a single path, an ensemble
of paths, or every node of a spatial grid.

Shapes (``...`` = leading batch axes)::

    drift(t, x)              -> (..., n)
    diffusion(t, x)          -> (..., n, m)
    jump(t, x, mark)         -> (..., n)
    drift_jac(t, x)          -> (..., n, n)       [i, j] = d a_i / d x_j
    diffusion_jac(t, x)      -> (..., n, m, n)    [i, k, j] = d b_ik / d x_j
    jump_jac(t, x, mark)     -> (..., n, n)       [i, j] = d g_i / d x_j
    diffusion_hess(t, x)     -> (..., n, m, n, n)

Derivatives may be omitted; central finite differences are substituted and
the substitution is listed in :attr:`JumpDiffusionModel.fd_fallbacks`.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from ..errors import InvalidModelError

FD_STEP = 1e-6
FD_STEP_SECOND = 1e-4


def _fd_jacobian(func, x, step=FD_STEP):
    """Central-difference Jacobian of a batched map, derivative on the last axis."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    cols = []
    for j in range(n):
        h = step * (1.0 + np.abs(x[..., j]))
        e = np.zeros_like(x)
        e[..., j] = h
        df = (np.asarray(func(x + e)) - np.asarray(func(x - e)))
        # broadcast h against the output's trailing axes
        hb = h.reshape(h.shape + (1,) * (df.ndim - h.ndim))
        cols.append(df / (2.0 * hb))
    return np.stack(cols, axis=-1)


@dataclass(frozen=True)
class MarkMeasure:
    """Finite atomic jump-mark measure: marks ``(J, n')`` with rates ``(J,)``."""

    marks: np.ndarray
    rates: np.ndarray

    def __post_init__(self):
        marks = np.atleast_2d(np.asarray(self.marks, dtype=float))
        rates = np.atleast_1d(np.asarray(self.rates, dtype=float))
        if rates.size == 0:
            marks = np.zeros((0, marks.shape[-1] if marks.size else 1))
        if marks.shape[0] != rates.shape[0]:
            raise InvalidModelError(
                f"{marks.shape[0]} marks but {rates.shape[0]} rates")
        if np.any(~np.isfinite(rates)) or np.any(rates <= 0.0):
            raise InvalidModelError("every atom rate must be finite and > 0")
        object.__setattr__(self, "marks", marks)
        object.__setattr__(self, "rates", rates)

    @classmethod
    def from_atoms(cls, atoms):
        """Build from an iterable of ``(mark, rate)`` pairs."""
        atoms = list(atoms)
        if not atoms:
            return cls.empty()
        marks = [np.atleast_1d(np.asarray(m, dtype=float)) for m, _ in atoms]
        rates = [float(r) for _, r in atoms]
        return cls(np.stack(marks), np.asarray(rates))

    @classmethod
    def empty(cls, mark_dim=1):
        return cls(np.zeros((0, mark_dim)), np.zeros(0))

    @property
    def total_rate(self) -> float:
        return float(np.sum(self.rates))

    @property
    def probabilities(self) -> np.ndarray:
        return self.rates / self.total_rate

    def __len__(self):
        return self.rates.shape[0]

    def atoms(self):
        return [(self.marks[j], float(self.rates[j])) for j in range(len(self))]


def _zero_jump(t, x, mark):
    return np.zeros_like(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class JumpDiffusionModel:
    n: int
    m: int
    drift: Callable
    diffusion: Callable
    jump: Optional[Callable] = None
    marks: MarkMeasure = field(default_factory=MarkMeasure.empty)
    drift_jac: Optional[Callable] = None
    diffusion_jac: Optional[Callable] = None
    jump_jac: Optional[Callable] = None
    diffusion_hess: Optional[Callable] = None
    name: str = "custom"
    params: dict = field(default_factory=dict)
    time_homogeneous: bool = False

    def __post_init__(self):
        if self.n < 1 or self.m < 0:
            raise InvalidModelError(f"bad dimensions n={self.n}, m={self.m}")
        if len(self.marks) and self.jump is None:
            raise InvalidModelError("marks given without a jump amplitude")

    # -- coefficient evaluation -------------------------------------------------

    def a(self, t, x):
        return np.asarray(self.drift(t, np.asarray(x, dtype=float)), dtype=float)

    def b(self, t, x):
        return np.asarray(self.diffusion(t, np.asarray(x, dtype=float)), dtype=float)

    def g(self, t, x, mark):
        if self.jump is None:
            return _zero_jump(t, x, mark)
        return np.asarray(self.jump(t, np.asarray(x, dtype=float), mark), dtype=float)

    def grad_a(self, t, x):
        if self.drift_jac is not None:
            return np.asarray(self.drift_jac(t, np.asarray(x, dtype=float)))
        return _fd_jacobian(lambda y: self.a(t, y), x)

    def grad_b(self, t, x):
        if self.diffusion_jac is not None:
            return np.asarray(self.diffusion_jac(t, np.asarray(x, dtype=float)))
        return _fd_jacobian(lambda y: self.b(t, y), x)

    def grad_g(self, t, x, mark):
        if self.jump is None:
            x = np.asarray(x, dtype=float)
            return np.zeros(x.shape + (self.n,))
        if self.jump_jac is not None:
            return np.asarray(self.jump_jac(t, np.asarray(x, dtype=float), mark))
        return _fd_jacobian(lambda y: self.g(t, y, mark), x)

    def hess_b(self, t, x):
        if self.diffusion_hess is not None:
            return np.asarray(self.diffusion_hess(t, np.asarray(x, dtype=float)))
        if self.diffusion_jac is not None:
            return _fd_jacobian(lambda y: self.grad_b(t, y), x)
        return _fd_jacobian(
            lambda y: _fd_jacobian(lambda z: self.b(t, z), y, FD_STEP_SECOND),
            x, FD_STEP_SECOND)

    @property
    def fd_fallbacks(self) -> list[str]:
        """Names of derivatives that are being approximated by finite differences."""
        out = []
        if self.drift_jac is None:
            out.append("grad_a")
        if self.diffusion_jac is None:
            out.append("grad_b")
        if self.jump is not None and self.jump_jac is None:
            out.append("grad_g")
        if self.diffusion_hess is None:
            out.append("hess_b")
        return out

    @property
    def has_jumps(self) -> bool:
        return len(self.marks) > 0

    def with_drift(self, drift, drift_jac=None, name=None):
        return replace(self, drift=drift, drift_jac=drift_jac,
                       name=name or self.name)

    def describe(self) -> dict:
        return {
            "model": self.name,
            "n": self.n,
            "m": self.m,
            "params": dict(self.params),
            "atoms": [(m.tolist(), r) for m, r in self.marks.atoms()],
            "fd_fallbacks": self.fd_fallbacks,
        }

    # -- smoothness probe --------------------------------------------------------

    def check_derivatives(self, seed=0, probes=20, box=2.0, t_range=(0.0, 1.0),
                          rtol=1e-5):
        """Compare analytic derivatives with central differences at random points.

        Returns a dict ``{derivative name: max scaled discrepancy}``; raises
        :class:`InvalidModelError` if any discrepancy exceeds ``rtol`` or any
        callable returns the wrong shape.
        """
        rng = np.random.default_rng(seed)
        xs = rng.uniform(-box, box, size=(probes, self.n))
        ts = rng.uniform(*t_range, size=probes)
        worst = {}

        def scaled(exact, approx):
            return float(np.max(np.abs(exact - approx) / (1.0 + np.abs(exact))))

        for t, x in zip(ts, xs):
            a = self.a(t, x)
            b = self.b(t, x)
            if a.shape != (self.n,) or b.shape != (self.n, self.m):
                raise InvalidModelError(
                    f"coefficient shapes {a.shape}, {b.shape} do not match "
                    f"n={self.n}, m={self.m}")
            pairs = []
            if self.drift_jac is not None:
                pairs.append(("grad_a", self.grad_a(t, x),
                              _fd_jacobian(lambda y: self.a(t, y), x)))
            if self.diffusion_jac is not None:
                pairs.append(("grad_b", self.grad_b(t, x),
                              _fd_jacobian(lambda y: self.b(t, y), x)))
            if self.diffusion_hess is not None:
                pairs.append(("hess_b", self.hess_b(t, x),
                              _fd_jacobian(lambda y: self.grad_b(t, y), x)))
            for mark in self.marks.marks:
                gv = self.g(t, x, mark)
                if gv.shape != (self.n,):
                    raise InvalidModelError(f"jump shape {gv.shape} != ({self.n},)")
                if self.jump_jac is not None:
                    pairs.append(("grad_g", self.grad_g(t, x, mark),
                                  _fd_jacobian(lambda y: self.g(t, y, mark), x)))
            for name, exact, approx in pairs:
                worst[name] = max(worst.get(name, 0.0), scaled(exact, approx))
        bad = {k: v for k, v in worst.items() if v > rtol}
        if bad:
            raise InvalidModelError(f"analytic derivatives disagree with finite "
                                    f"differences: {bad}")
        return worst
