"""Rotating Rayleigh-Benard low-Mach limit laboratory."""

__version__ = "0.1.0"
