"""Boundary-state methods for the measured two-dimensional cluster state."""

__version__ = "0.1.0"
