"""Numerical toolkit for the alpha-invariant of the two-point blow-up of CP^2."""

__version__ = "0.1.0"
