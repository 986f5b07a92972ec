"""Laboratory for jump-diffusion SDEs: first integrals, invariant kernels, Kolmogorov equations."""

__version__ = "0.1.0"
