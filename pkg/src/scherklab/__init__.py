"""Numerical laboratory for constant-mean-curvature graphs over ideal
polygonal domains of the hyperbolic plane."""

__version__ = "0.1.0"
