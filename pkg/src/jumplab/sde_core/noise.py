"""Time grids and sampled driving noise (Wiener increments + Poisson jumps)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidModelError
from .models import MarkMeasure

# spawn_key tags keep the jump, Wiener and bridge streams independent
_JUMP_STREAM = 0
_WIENER_STREAM = 1
_BRIDGE_STREAM = 2


@dataclass(frozen=True)
class TimeGrid:
    t0: float
    T: float
    base_steps: int
    nodes: np.ndarray = None

    def __post_init__(self):
        if not self.T > self.t0:
            raise ValueError(f"need T > t0, got t0={self.t0}, T={self.T}")
        if self.base_steps < 1:
            raise ValueError("base_steps must be positive")
        nodes = self.nodes
        if nodes is None:
            nodes = np.linspace(self.t0, self.T, self.base_steps + 1)
        nodes = np.asarray(nodes, dtype=float)
        if nodes[0] != self.t0 or nodes[-1] != self.T or np.any(np.diff(nodes) <= 0):
            raise ValueError("grid nodes must increase strictly from t0 to T")
        object.__setattr__(self, "nodes", nodes)

    @classmethod
    def uniform(cls, t0, T, steps):
        return cls(float(t0), float(T), int(steps))

    @property
    def steps(self) -> int:
        return self.nodes.size - 1

    @property
    def dt(self) -> np.ndarray:
        return np.diff(self.nodes)

    @property
    def base_dt(self) -> float:
        return (self.T - self.t0) / self.base_steps

    def with_nodes(self, times):
        return TimeGrid(self.t0, self.T, self.base_steps,
                        np.union1d(self.nodes, np.asarray(times, dtype=float)))

    def base(self):
        return TimeGrid.uniform(self.t0, self.T, self.base_steps)


@dataclass(frozen=True)
class NoiseRealization:
    """One sample of the driving noise on a grid that contains every jump time.

    ``dw[:, i]`` is the Wiener increment over ``[nodes[i], nodes[i+1]]``;
    ``jump_nodes[j]`` is the grid index of jump ``j`` (time ``jump_times[j]``,
    atom ``jump_atoms[j]``).
    """

    grid: TimeGrid
    dw: np.ndarray
    jump_times: np.ndarray
    jump_atoms: np.ndarray
    marks: MarkMeasure
    seed: int
    level: int = 0
    jump_nodes: np.ndarray = field(init=False)

    def __post_init__(self):
        jt = np.array(self.jump_times, dtype=float)
        object.__setattr__(self, "jump_times", jt)
        object.__setattr__(self, "jump_atoms", np.array(self.jump_atoms, dtype=int))
        object.__setattr__(self, "dw", np.array(self.dw, dtype=float, ndmin=2))
        if self.dw.shape[1] != self.grid.steps:
            raise ValueError(f"{self.dw.shape[1]} increments for {self.grid.steps} steps")
        idx = np.searchsorted(self.grid.nodes, jt)
        if jt.size:
            if np.any(np.diff(jt) <= 0) or jt[0] <= self.grid.t0 or jt[-1] > self.grid.T:
                raise ValueError("jump times must increase strictly inside (t0, T]")
            if np.any(self.grid.nodes[idx] != jt):
                raise ValueError("every jump time must be a grid node")
        object.__setattr__(self, "jump_nodes", idx.astype(int))
        for name in ("dw", "jump_times", "jump_atoms", "jump_nodes"):
            getattr(self, name).setflags(write=False)

    @property
    def m(self) -> int:
        return self.dw.shape[0]

    @property
    def n_jumps(self) -> int:
        return self.jump_times.size

    @property
    def jump_marks(self) -> np.ndarray:
        return self.marks.marks[self.jump_atoms]

    def jump_at_node(self) -> dict:
        """Map grid index -> jump index."""
        return {int(k): j for j, k in enumerate(self.jump_nodes)}

    def wiener_path(self) -> np.ndarray:
        """W at every node, shape ``(m, steps + 1)`` with ``W(t0) = 0``."""
        w = np.zeros((self.m, self.grid.steps + 1))
        np.cumsum(self.dw, axis=1, out=w[:, 1:])
        return w

    def wiener_at(self, t) -> np.ndarray:
        """W(t) for times on the grid (piecewise linear in between)."""
        w = self.wiener_path()
        return np.stack([np.interp(t, self.grid.nodes, w[k]) for k in range(self.m)], axis=-1)

    def jumps_up_to(self, t):
        """Indices of jumps with time <= t."""
        return np.nonzero(self.jump_times <= t)[0]

    def describe(self) -> dict:
        return {"seed": self.seed, "level": self.level, "steps": self.grid.steps,
                "base_steps": self.grid.base_steps, "t0": self.grid.t0,
                "T": self.grid.T, "n_jumps": self.n_jumps}


def _stream(seed, tag, level=0):
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=(tag, level))
    return np.random.Generator(np.random.PCG64(ss))


def sample_jumps(marks: MarkMeasure, t0, T, rng):
    """Exact Poisson jump times on ``(t0, T]`` by exponential inter-arrivals."""
    if not len(marks):
        return np.zeros(0), np.zeros(0, dtype=int)
    lam = marks.total_rate
    if not lam > 0.0:
        raise InvalidModelError("total jump rate must be positive when atoms exist")
    times = []
    t = t0
    while True:
        t += rng.exponential(1.0 / lam)
        if t > T:
            break
        times.append(t)
    times = np.asarray(times)
    atoms = rng.choice(len(marks), size=times.size, p=marks.probabilities)
    return times, atoms.astype(int)


def sample_noise(model, grid: TimeGrid, seed: int) -> NoiseRealization:
    """Draw jumps exactly, insert them as grid nodes, then draw Wiener increments."""
    marks = model.marks
    if len(marks) and not marks.total_rate > 0.0:
        raise InvalidModelError("total jump rate must be positive when atoms exist")
    base = grid.base()
    times, atoms = sample_jumps(marks, base.t0, base.T, _stream(seed, _JUMP_STREAM))
    full = base.with_nodes(times)
    rng = _stream(seed, _WIENER_STREAM)
    dw = rng.standard_normal((model.m, full.steps)) * np.sqrt(full.dt)
    return NoiseRealization(full, dw, times, atoms, marks, int(seed))


def refine_noise(noise: NoiseRealization) -> NoiseRealization:
    """Halve the base step, filling new nodes by Brownian-bridge sampling.

    The refined realization keeps W at every old node and keeps the jumps, so
    coarse and fine paths live on the same sample of the driving noise.
    """
    old = noise.grid
    uniform = np.setdiff1d(old.nodes, noise.jump_times)
    mids = 0.5 * (uniform[:-1] + uniform[1:])
    fine = TimeGrid(old.t0, old.T, 2 * old.base_steps, np.union1d(old.nodes, mids))
    w_old = noise.wiener_path()
    rng = _stream(noise.seed, _BRIDGE_STREAM, noise.level + 1)

    pos = np.searchsorted(old.nodes, fine.nodes)
    is_old = old.nodes[np.minimum(pos, old.nodes.size - 1)] == fine.nodes
    new_idx = np.nonzero(~is_old)[0]
    w_new = np.zeros((noise.m, fine.nodes.size))
    w_new[:, is_old] = w_old[:, pos[is_old]]
    # each new node sits alone between two old nodes (factor-two refinement),
    # so the bridge draws are conditionally independent
    right = pos[new_idx]
    left = right - 1
    ta, tb, s = old.nodes[left], old.nodes[right], fine.nodes[new_idx]
    frac = (s - ta) / (tb - ta)
    std = np.sqrt((s - ta) * (tb - s) / (tb - ta))
    z = rng.standard_normal((noise.m, new_idx.size))
    w_new[:, new_idx] = (w_old[:, left] + frac * (w_old[:, right] - w_old[:, left])
                         + std * z)
    dw = np.diff(w_new, axis=1)
    return NoiseRealization(fine, dw, noise.jump_times, noise.jump_atoms,
                            noise.marks, noise.seed, noise.level + 1)


def refinement_ladder(noise: NoiseRealization, levels: int):
    """``[noise, refine(noise), refine(refine(noise)), ...]`` with ``levels`` refinements."""
    out = [noise]
    for _ in range(levels):
        out.append(refine_noise(out[-1]))
    return out
