"""Lifted LMI (semidefinite) representations of convex semialgebraic sets."""

from .polyalg import MatrixPolynomial, MonomialBasis, Polynomial, parse_polynomial

__version__ = "0.1.0"

__all__ = ["MatrixPolynomial", "MonomialBasis", "Polynomial", "parse_polynomial", "__version__"]
