"""Confidence intervals for linear functionals in high-dimensional Gaussian-design regression."""

__version__ = "0.1.0"
