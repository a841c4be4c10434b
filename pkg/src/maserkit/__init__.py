"""Damped-oscillator master equations, relaxation eigenbases, micromaser
kicks, and photodetection statistics on truncated Fock spaces."""

__version__ = "0.1.0"

from .liouvillian import OscillatorParams, damping_eigenvalue

__all__ = ["OscillatorParams", "damping_eigenvalue", "__version__"]
