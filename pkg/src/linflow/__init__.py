"""Spatially linear solutions of the incompressible Navier-Stokes equations."""

__version__ = "0.1.0"
