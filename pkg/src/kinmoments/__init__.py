"""Moment and tail machinery for the space-homogeneous elastic Boltzmann equation
with variable hard potentials and angular cutoff."""

__version__ = "0.1.0"
