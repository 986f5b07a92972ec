"""First integrals, field differentials and the Itô–Wentzell chain rule."""

from .candidates import (CandidateIntegral, NoiseAwareCandidate, identity_candidate,
                         registry_candidate)
from .coefficients import (FieldDifferential, first_integral_coeffs_xdep,
                           first_integral_coeffs_xindep, probe_x_independence)
from .evolution import evolve_field
from .verify import ito_wentzell_residual, ito_wentzell_study, verify_first_integral

__all__ = [
    "CandidateIntegral", "FieldDifferential", "NoiseAwareCandidate", "evolve_field",
    "first_integral_coeffs_xdep", "first_integral_coeffs_xindep", "identity_candidate",
    "ito_wentzell_residual", "ito_wentzell_study", "probe_x_independence",
    "registry_candidate", "verify_first_integral",
]
