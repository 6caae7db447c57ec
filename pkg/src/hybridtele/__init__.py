"""Hybrid spin/coherent-state teleportation: exact state calculus, a Fock-basis
cross-check, seeded Monte-Carlo trials and noise analysis."""

__version__ = "0.1.0"
