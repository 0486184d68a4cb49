"""Simulation and optimization lab for two-tier heterogeneous cellular networks."""

__version__ = "0.1.0"
