"""Spatial grids, grid fields, interpolation and finite-difference operators."""

from .grid import GridField, SpatialGrid
from .interp import ABSORBING, CLAMPED, CubicSampler, cubic_at, local_cubic
from .operators import (DensityOperator, GeneratorOperator, check_time_step,
                        stable_time_step)

__all__ = [
    "ABSORBING", "CLAMPED", "CubicSampler", "DensityOperator", "GeneratorOperator",
    "GridField", "SpatialGrid", "check_time_step", "cubic_at", "local_cubic",
    "stable_time_step",
]
