"""Effective Hamiltonians of viscous Hamilton-Jacobi equations in random media."""

__version__ = "0.1.0"
