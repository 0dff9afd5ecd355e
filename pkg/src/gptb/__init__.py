"""Explicit lower bounds for upper-tail probabilities of Gaussian suprema,
with Monte-Carlo and quadrature verification."""

__version__ = "0.1.0"
