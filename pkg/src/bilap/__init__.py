"""Rank-one perturbations of the discrete bilaplacian on Z^d."""

__version__ = "0.1.0"
