"""Quantum generative model benchmarking: QCBM, QGAN and a classical GAN baseline."""

__version__ = "0.1.0"
