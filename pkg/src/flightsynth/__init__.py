"""Synthetic flight records from a Gaussian copula or a tabular VAE, graded
by a four-stage quality evaluation."""

__version__ = "0.1.0"
