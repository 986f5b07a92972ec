"""Uniform tensor grids on [lo, hi]^n (n <= 2) and grid-sampled fields."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class SpatialGrid:
    lo: tuple
    hi: tuple
    points: int

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lo))
        hi = tuple(float(v) for v in np.atleast_1d(self.hi))
        if len(lo) != len(hi) or len(lo) not in (1, 2):
            raise ValueError("grids are 1-D or 2-D")
        if any(h <= l for l, h in zip(lo, hi)):
            raise ValueError("need hi > lo on every axis")
        if self.points < 8:
            raise ValueError("need at least 8 points per axis")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def line(cls, lo, hi, points):
        return cls((lo,), (hi,), points)

    @property
    def n(self) -> int:
        return len(self.lo)

    @property
    def shape(self) -> tuple:
        return (self.points,) * self.n

    @property
    def dx(self) -> np.ndarray:
        return (np.asarray(self.hi) - np.asarray(self.lo)) / (self.points - 1)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.dx))

    @property
    def axes(self) -> list:
        return [np.linspace(l, h, self.points) for l, h in zip(self.lo, self.hi)]

    @property
    def x(self) -> np.ndarray:
        """Node coordinates, shape ``(*shape, n)``."""
        return np.stack(np.meshgrid(*self.axes, indexing="ij"), axis=-1)

    def faces(self, axis) -> np.ndarray:
        """Coordinates of the cell faces normal to ``axis`` (one extra row along it)."""
        axes = self.axes
        a = axes[axis]
        d = self.dx[axis]
        axes[axis] = np.concatenate([[a[0] - 0.5 * d], a + 0.5 * d])
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def trapezoid_weights(self) -> np.ndarray:
        w1 = []
        for d in self.dx:
            w = np.full(self.points, d)
            w[0] = w[-1] = 0.5 * d
            w1.append(w)
        if self.n == 1:
            return w1[0]
        return np.outer(w1[0], w1[1])

    def integrate(self, values) -> np.ndarray:
        """Trapezoid rule over the trailing spatial axes."""
        w = self.trapezoid_weights()
        axes = tuple(range(-self.n, 0))
        return np.sum(np.asarray(values) * w, axis=axes)

    def contains(self, points, margin=0) -> np.ndarray:
        """Boolean mask of points at least ``margin`` cells inside the box."""
        p = np.asarray(points)
        lo = np.asarray(self.lo) + margin * self.dx
        hi = np.asarray(self.hi) - margin * self.dx
        return np.all((p >= lo) & (p <= hi), axis=-1)

    def index_coords(self, points) -> np.ndarray:
        """Fractional grid indices of physical points, shape ``(..., n)``."""
        return (np.asarray(points) - np.asarray(self.lo)) / self.dx

    def describe(self) -> dict:
        return {"lo": list(self.lo), "hi": list(self.hi), "points": self.points,
                "dx": self.dx.tolist()}


@dataclass
class GridField:
    """Snapshots ``values[s]`` of a field at ``times[s]`` on ``grid``.

    ``left_limits`` maps a snapshot index to the field just before a jump
    applied at that time.
    """

    grid: SpatialGrid
    times: np.ndarray
    values: np.ndarray
    left_limits: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape[1:] != self.grid.shape or self.values.shape[0] != self.times.size:
            raise ValueError(
                f"values shape {self.values.shape} does not match "
                f"{self.times.size} times on grid {self.grid.shape}")

    @classmethod
    def from_function(cls, grid, func, t0=0.0, **meta):
        return cls(grid, [t0], [np.asarray(func(grid.x), dtype=float)], meta=meta)

    @property
    def initial(self):
        return self.values[0]

    @property
    def final(self):
        return self.values[-1]

    def snapshot_index(self, t) -> int:
        i = int(np.argmin(np.abs(self.times - t)))
        if not np.isclose(self.times[i], t, rtol=0, atol=1e-12 * max(1.0, abs(t))):
            raise KeyError(f"no snapshot at t={t}")
        return i

    def mass(self) -> np.ndarray:
        return self.grid.integrate(self.values)

    def to_csv(self, path, every=1):
        """Columns: grid coordinates then one column per stored time."""
        import csv

        idx = list(range(0, self.times.size, every))
        if idx[-1] != self.times.size - 1:
            idx.append(self.times.size - 1)
        pts = self.grid.x.reshape(-1, self.grid.n)
        vals = self.values.reshape(self.times.size, -1)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            head = [f"x_{i + 1}" for i in range(self.grid.n)]
            w.writerow(head + [f"t={self.times[s]:.6g}" for s in idx])
            for r in range(pts.shape[0]):
                w.writerow([repr(float(v)) for v in pts[r]]
                           + [repr(float(vals[s, r])) for s in idx])
