"""Numerical laboratory for the stability of steady planar Euler flows."""

__version__ = "0.1.0"

__all__ = ["__version__"]
