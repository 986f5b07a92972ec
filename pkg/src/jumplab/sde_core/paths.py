"""Euler-Maruyama paths with exact jump insertion."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from ..errors import DivergenceError
from .noise import NoiseRealization


@dataclass(frozen=True)
class Trajectory:
    """Simulated states on the noise grid.

    ``states`` has shape ``(len(node_index), *batch, n)``; ``node_index``
    lists which grid nodes were recorded (all of them by default).  At a
    jump node the recorded state is the post-jump value and the pre-jump
    value is kept in ``left_limits[j]`` for jump ``j``.
    """

    nodes: np.ndarray
    states: np.ndarray
    node_index: np.ndarray
    jump_nodes: np.ndarray
    left_limits: np.ndarray
    jump_marks: np.ndarray

    @property
    def times(self):
        return self.nodes[self.node_index]

    @property
    def x0(self):
        return self.states[0]

    @property
    def final(self):
        return self.states[-1]

    @property
    def complete(self) -> bool:
        return self.node_index.size == self.nodes.size

    def to_csv(self, path, jacobian=None):
        """Write ``t, x_1..x_n, J, jump_flag`` (single-path trajectories only)."""
        if self.states.ndim != 2:
            raise ValueError("CSV export needs an unbatched trajectory")
        n = self.states.shape[-1]
        jumps = set(int(k) for k in self.jump_nodes)
        J = None if jacobian is None else jacobian.values
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t"] + [f"x_{i + 1}" for i in range(n)] + ["J", "jump_flag"])
            for r, k in enumerate(self.node_index):
                row = [repr(float(self.nodes[k]))]
                row += [repr(float(v)) for v in self.states[r]]
                row.append("" if J is None else repr(float(J[r])))
                row.append(1 if int(k) in jumps else 0)
                w.writerow(row)


def simulate_path(model, x0, noise: NoiseRealization, record="all") -> Trajectory:
    """Euler-Maruyama between nodes; jumps ``x+ = x- + g(tau, x-, mark)`` at jump nodes.

    ``x0`` may be a single state ``(n,)`` or a batch ``(..., n)`` of starting
    points sharing the same noise.  ``record="ends"`` keeps only the first
    and last state (left limits are always kept).
    """
    x = np.array(x0, dtype=float)
    if x.shape[-1] != model.n:
        raise ValueError(f"x0 has dimension {x.shape[-1]}, model has n={model.n}")
    if not np.all(np.isfinite(x)):
        raise ValueError("x0 must be finite")
    if noise.m != model.m:
        raise ValueError(f"noise has {noise.m} Wiener components, model needs {model.m}")
    nodes = noise.grid.nodes
    dt = noise.grid.dt
    dw = noise.dw
    steps = nodes.size - 1
    jump_of = noise.jump_at_node()
    marks = noise.jump_marks
    keep_all = record == "all"

    states = [x.copy()] if keep_all else None
    lefts = []
    first = x.copy()
    for i in range(steps):
        t = nodes[i]
        x = x + model.a(t, x) * dt[i] + model.b(t, x) @ dw[:, i]
        j = jump_of.get(i + 1)
        if j is not None:
            lefts.append(x.copy())
            x = x + model.g(nodes[i + 1], x, marks[j])
        if not np.isfinite(x).all():
            raise DivergenceError(
                f"non-finite state at step {i} (t={nodes[i + 1]:.6g})", step=i,
                time=float(nodes[i + 1]))
        if keep_all:
            states.append(x)
    if keep_all:
        states = np.stack(states)
        index = np.arange(steps + 1)
    else:
        states = np.stack([first, x])
        index = np.array([0, steps])
    left = np.stack(lefts) if lefts else np.zeros((0,) + x.shape)
    return Trajectory(nodes, states, index, noise.jump_nodes.copy(), left, marks)


def simulate_ensemble(model, x0, t0, T, steps, rng, return_diverged=False):
    """Terminal states of independent paths, each with its own noise.

    Every path draws exact Poisson jump times; the continuous part uses the
    uniform grid with extra sub-steps ending at that path's jump times, which
    is the same scheme as :func:`simulate_path` on a per-path grid.  Paths that
    become non-finite are frozen as NaN and flagged.
    """
    x = np.array(x0, dtype=float)
    if x.ndim == 1:
        x = x[:, None] if model.n == 1 else x[None, :]
    P = x.shape[0]
    marks = model.marks
    h = (T - t0) / steps

    if len(marks):
        lam = marks.total_rate
        counts = rng.poisson(lam * (T - t0), size=P)
        jmax = int(counts.max()) if P else 0
        jt = np.full((P, jmax + 1), np.inf)
        ja = np.zeros((P, jmax + 1), dtype=int)
        for p in np.nonzero(counts)[0]:
            c = counts[p]
            jt[p, :c] = np.sort(rng.uniform(t0, T, size=c))
            ja[p, :c] = rng.choice(len(marks), size=c, p=marks.probabilities)
    else:
        jt = np.full((P, 1), np.inf)
        ja = np.zeros((P, 1), dtype=int)
    ptr = np.zeros(P, dtype=int)
    rows = np.arange(P)
    alive = np.ones(P, dtype=bool)

    s_now = np.full(P, float(t0))
    for k in range(steps):
        t_end = t0 + (k + 1) * h if k < steps - 1 else T
        while True:
            nxt = jt[rows, ptr]
            hit = np.nonzero(alive & (nxt <= t_end))[0]
            if hit.size == 0:
                break
            tau = nxt[hit]
            _euler(model, x, hit, s_now[hit], tau - s_now[hit], rng)
            atoms = ja[hit, ptr[hit]]
            for j in np.unique(atoms):
                sel = atoms == j
                rows_j = hit[sel]
                if model.time_homogeneous:
                    x[rows_j] = x[rows_j] + model.g(tau[sel][0], x[rows_j], marks.marks[j])
                else:
                    for p, tp in zip(rows_j, tau[sel]):
                        x[p] = x[p] + model.g(tp, x[p], marks.marks[j])
            s_now[hit] = tau
            ptr[hit] += 1
        idx = np.nonzero(alive)[0]
        _euler(model, x, idx, s_now[idx], t_end - s_now[idx], rng)
        s_now[idx] = t_end
        bad = alive & ~np.all(np.isfinite(x), axis=1)
        if bad.any():
            alive &= ~bad
            x[bad] = np.nan
    if return_diverged:
        return x, ~alive
    return x


def _euler(model, x, idx, s, dtv, rng):
    if idx.size == 0:
        return
    xs = x[idx]
    dW = rng.standard_normal((idx.size, model.m)) * np.sqrt(np.maximum(dtv, 0.0))[:, None]
    # coefficients may depend on t; group by distinct time when it varies
    if model.time_homogeneous or np.all(s == s[0]):
        t = s[0]
        a = model.a(t, xs)
        b = model.b(t, xs)
    else:
        a = np.stack([model.a(si, xi) for si, xi in zip(s, xs)])
        b = np.stack([model.b(si, xi) for si, xi in zip(s, xs)])
    x[idx] = xs + a * dtv[:, None] + np.einsum("pik,pk->pi", b, dW)
