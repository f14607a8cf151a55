"""Numerical tools for the Fourier extension operator on the paraboloid:
dyadic geometry, wave packets, space-time norms, a discretized model
operator and level-set diagnostics."""

__version__ = "0.1.0"
