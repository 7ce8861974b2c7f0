"""Finite-volume simulator for the Navier-Stokes-Nernst-Planck-Poisson system."""
__version__ = "0.1.0"
