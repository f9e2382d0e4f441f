"""Numerical laboratory for regularized anyons, the eCS/ncILW Hamiltonians
and their truncated Fock-space realization."""

from .params import ModelParams, Truncation, bogo, c0, c_eps, G_const

__all__ = ["ModelParams", "Truncation", "bogo", "c0", "c_eps", "G_const"]
__version__ = "0.1.0"
