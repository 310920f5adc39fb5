"""Relative information gain, Gibbs posteriors and PAC-Bayesian excess-risk bounds
for fixed-design Gaussian process regression."""

from riglab.errors import DomainError, InvalidInputError, NumericError

__version__ = "0.1.0"

__all__ = ["DomainError", "InvalidInputError", "NumericError", "__version__"]
