"""Index insurance and fisher input choice under stochastic production."""

__version__ = "0.1.0"
