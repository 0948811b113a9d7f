"""Simulation, estimation and verification tools for fBm and the Rosenblatt process."""

__version__ = "0.1.0"
