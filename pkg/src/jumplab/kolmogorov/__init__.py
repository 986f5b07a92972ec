"""Forward and backward equations, transition densities and cross-checks."""

from .backward import BackwardField, solve_backward
from .compensation import compensate_drift
from .crosscheck import drift_compensation_check, duality, expectation_link, forward_vs_mc
from .forward import DensityField, solve_forward
from .montecarlo import Histogram, bin_masses, monte_carlo_density
from .transition import (bin_indicators, chapman_consistency, transition_backward,
                         transition_forward)

__all__ = [
    "BackwardField", "DensityField", "Histogram", "bin_indicators", "bin_masses",
    "chapman_consistency", "compensate_drift", "drift_compensation_check", "duality",
    "expectation_link", "forward_vs_mc", "monte_carlo_density", "solve_backward",
    "solve_forward", "transition_backward", "transition_forward",
]
