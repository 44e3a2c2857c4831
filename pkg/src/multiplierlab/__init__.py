"""Schur and Fourier multipliers of discrete groups on Schatten classes and group L^p spaces."""

__version__ = "0.1.0"
