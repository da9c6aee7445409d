"""Simulation lab for moderately interacting particle systems and their
cross-diffusion mean-field limits."""

__version__ = "0.1.0"
