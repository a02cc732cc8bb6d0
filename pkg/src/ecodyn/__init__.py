"""Hamiltonian Lotka-Volterra growth models and the production functions they conserve."""

__version__ = "0.1.0"
