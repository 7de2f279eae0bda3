"""Numerical laboratory for ground states of the 1-D pure-power focusing NLS."""

__version__ = "0.1.0"
