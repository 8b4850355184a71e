"""Simulation of Rydberg antiblockade Toffoli and C3NOT gate protocols."""

__version__ = "0.1.0"
