"""Numerical laboratory for boundary spectral data of 2D magnetic Schrodinger operators."""

__version__ = "0.1.0"
