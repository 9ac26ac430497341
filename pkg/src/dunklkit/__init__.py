"""Numerical harmonic analysis for the Dunkl Laplacian of the reflection group Z_2^n."""

__version__ = "0.1.0"
