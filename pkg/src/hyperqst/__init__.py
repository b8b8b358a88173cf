"""Simulation and Bayesian tomography of polarization x frequency-bin hyperentangled photon pairs."""

__version__ = "0.1.0"
