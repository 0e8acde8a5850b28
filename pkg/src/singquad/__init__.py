"""Corrected trapezoidal rules for integrands with a point singularity."""

__version__ = "0.1.0"
