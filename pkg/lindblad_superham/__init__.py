"""Lindblad-to-super-Hamiltonian mapping toolkit"""

__version__ = "0.3.0"
