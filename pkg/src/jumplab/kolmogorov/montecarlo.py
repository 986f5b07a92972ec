"""Monte Carlo histograms of terminal states and exact bin masses of grid densities."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from dataclasses import field as dc_field

import numpy as np

from ..parallel import map_ordered
from ..sde_core.paths import simulate_ensemble

CHUNK = 20_000
DIVERGENCE_WARN = 0.01


@dataclass
class Histogram:
    """Binned terminal states.

    ``counts.sum() + outside == valid``: paths that end outside the binned
    box are counted in ``outside``; diverged paths are excluded from
    ``valid`` and counted in ``diverged``.
    """

    edges: list
    counts: np.ndarray
    valid: int
    outside: int
    diverged: int
    warnings: list = dc_field(default_factory=list)
    config: dict = dc_field(default_factory=dict)

    @property
    def bin_volume(self):
        widths = [np.diff(e) for e in self.edges]
        if len(widths) == 1:
            return widths[0]
        return np.multiply.outer(widths[0], widths[1])

    @property
    def masses(self):
        return self.counts / self.valid

    @property
    def density(self):
        return self.masses / self.bin_volume

    @property
    def stderr(self):
        """Per-bin standard error of the density estimate."""
        p = self.masses
        return np.sqrt(p * (1.0 - p) / self.valid) / self.bin_volume

    @property
    def centers(self):
        return [0.5 * (e[1:] + e[:-1]) for e in self.edges]

    def to_csv(self, path):
        """Columns: bin lower/upper edges per axis, count, density, std_error."""
        n = len(self.edges)
        idx = np.ndindex(*self.counts.shape)
        dens, se = self.density, self.stderr
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            head = []
            for i in range(n):
                head += [f"lo_{i + 1}", f"hi_{i + 1}"]
            w.writerow(head + ["count", "density", "std_error"])
            for ix in idx:
                row = []
                for d, k in enumerate(ix):
                    row += [repr(float(self.edges[d][k])), repr(float(self.edges[d][k + 1]))]
                w.writerow(row + [int(self.counts[ix]), repr(float(dens[ix])), repr(float(se[ix]))])


def default_edges(grid, bins):
    return [np.linspace(lo, hi, bins + 1) for lo, hi in zip(grid.lo, grid.hi)]


def _hat_integrals(axis, edges):
    """``A[i, k] = int_{e_i}^{e_{i+1}} hat_k(x) dx`` for the nodal hat functions."""
    h = axis[1] - axis[0]
    e = np.clip(edges, axis[0], axis[-1])
    u = (e[:, None] - axis[None, :]) / h
    prim = np.where(u <= -1, 0.0,
                    np.where(u <= 0, 0.5 * (1 + u) ** 2,
                             np.where(u <= 1, 1 - 0.5 * (1 - u) ** 2, 1.0))) * h
    return np.diff(prim, axis=0)


def bin_masses(grid, values, edges):
    """Exact bin integrals of the piecewise-(bi)linear interpolant of ``values``."""
    mats = [_hat_integrals(ax, np.asarray(e, dtype=float)) for ax, e in zip(grid.axes, edges)]
    values = np.asarray(values, dtype=float)
    if grid.n == 1:
        return values @ mats[0].T
    return np.einsum("ik,...kl,jl->...ij", mats[0], values, mats[1])


def monte_carlo_density(model, init, samples, grid, T, t0=0.0, bins=50, edges=None,
                        steps=None, seed=0, threads=1):
    """Histogram of ``x(T)`` over ``samples`` independent paths.

    Parameters
    ----------
    init : array ``(n,)`` or callable ``(rng, size) -> (size, n)``
        Fixed starting point or initial-law sampler.
    steps : int, optional
        Euler steps on ``[t0, T]`` (jump times are inserted per path);
        default gives a step of at most ``2e-3``.

    Paths are drawn in fixed chunks with independent spawned seeds, so the
    result does not depend on ``threads``.
    """
    if samples < 1000:
        raise ValueError("monte_carlo_density needs at least 1000 paths")
    if edges is None:
        edges = default_edges(grid, bins)
    edges = [np.asarray(e, dtype=float) for e in edges]
    if steps is None:
        steps = max(50, math.ceil((T - t0) / 2e-3))
    chunks = [CHUNK] * (samples // CHUNK) + ([samples % CHUNK] if samples % CHUNK else [])
    seqs = np.random.SeedSequence(seed).spawn(len(chunks))

    def run(job):
        size, ss = job
        rng = np.random.default_rng(ss)
        if callable(init):
            x0 = np.asarray(init(rng, size), dtype=float).reshape(size, model.n)
        else:
            x0 = np.broadcast_to(np.asarray(init, dtype=float), (size, model.n)).copy()
        return simulate_ensemble(model, x0, t0, T, steps, rng, return_diverged=True)

    parts = map_ordered(run, list(zip(chunks, seqs)), threads)
    x = np.concatenate([p[0] for p in parts])
    bad = np.concatenate([p[1] for p in parts])
    good = x[~bad]
    counts, _ = np.histogramdd(good, bins=edges)
    valid = int(good.shape[0])
    outside = valid - int(counts.sum())
    warns = []
    if bad.mean() > DIVERGENCE_WARN:
        warns.append(f"{int(bad.sum())} of {samples} paths diverged (> 1%); estimate unreliable")
    cfg = {"samples": samples, "T": T, "t0": t0, "steps": steps, "seed": seed,
           "bins": [len(e) - 1 for e in edges], "model": model.describe()}
    return Histogram(edges, counts, valid, outside, int(bad.sum()), warns, cfg)
