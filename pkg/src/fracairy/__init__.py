"""Time-fractional Airy equation on star graphs by boundary potentials."""

__version__ = "0.1.0"
