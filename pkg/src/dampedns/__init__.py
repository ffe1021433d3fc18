"""Pseudo-spectral damped Navier-Stokes simulator and energy-bound auditor."""

__version__ = "0.1.0"
