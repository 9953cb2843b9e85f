"""Quantum-dot single photons stored in an atomic-frequency-comb memory: simulation and analysis."""

__version__ = "0.1.0"
