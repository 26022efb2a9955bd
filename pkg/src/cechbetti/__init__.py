"""Simulation and verification toolkit for Betti-number processes of random
Cech complexes on Poisson point clouds."""

from .kernels import BACKEND

__all__ = ["BACKEND"]
__version__ = "0.1.0"
