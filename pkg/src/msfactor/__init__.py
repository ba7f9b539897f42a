"""Matrix spectral factorization by Bauer's method."""

__version__ = "0.1.0"
