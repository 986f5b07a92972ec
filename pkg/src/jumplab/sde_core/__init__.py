"""Models, noise, paths, inverse jump map and path Jacobians."""

from .jacobian import (JacobianSeries, divergence_b, evolve_jacobian, inverse_jump_map,
                       inverse_map_det, jump_jacobian_det, k_coefficient, pull_back)
from .models import JumpDiffusionModel, MarkMeasure
from .noise import (NoiseRealization, TimeGrid, refine_noise, refinement_ladder,
                    sample_jumps, sample_noise)
from .paths import Trajectory, simulate_ensemble, simulate_path
from .registry import REGISTRY, make_model

__all__ = [
    "JacobianSeries", "JumpDiffusionModel", "MarkMeasure", "NoiseRealization", "REGISTRY",
    "TimeGrid", "Trajectory", "divergence_b", "evolve_jacobian", "inverse_jump_map",
    "inverse_map_det", "jump_jacobian_det", "k_coefficient", "make_model", "pull_back",
    "refine_noise", "refinement_ladder", "sample_jumps", "sample_noise",
    "simulate_ensemble", "simulate_path",
]
