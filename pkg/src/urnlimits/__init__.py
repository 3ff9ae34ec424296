"""Simulation and verification toolkit for Polya and q-Polya urns and their scaling limits."""

__version__ = "0.1.0"
