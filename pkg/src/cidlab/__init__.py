"""Simulation and verification tools for predictive distributions of
conditionally identically distributed sequences."""

__version__ = "0.1.0"
