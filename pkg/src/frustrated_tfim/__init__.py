"""Variational and exact solvers for the frustrated transverse-field Ising model
on square lattices with one diagonal bond per plaquette."""

__version__ = "0.1.0"
