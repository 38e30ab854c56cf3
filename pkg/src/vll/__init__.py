"""Numerical laboratory for vanishing-viscosity limits of 2D Navier-Stokes."""

__version__ = "0.1.0"
