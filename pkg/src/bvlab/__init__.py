"""Executable checks and desk-scale experiments for automorphic L-function coefficients over Q."""

__version__ = "0.1.0"
