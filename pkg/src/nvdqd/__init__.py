"""Steady-state NV-center entanglement mediated by a nanotube double quantum dot."""

__version__ = "0.1.0"
