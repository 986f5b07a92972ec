"""Stochastic kernel equation: solver and invariant checks."""

from .checks import (TEST_FUNCTIONS, check_global_invariants, check_pathwise_invariant,
                     sample_density)
from .solver import (KernelField, kernel_noise, kernel_time_grid, solve_kernel_spde,
                     validate_density)

__all__ = [
    "KernelField", "TEST_FUNCTIONS", "check_global_invariants", "check_pathwise_invariant",
    "kernel_noise", "kernel_time_grid", "sample_density", "solve_kernel_spde",
    "validate_density",
]
