"""Seeded problem generators shared by unit and acceptance tests."""

from __future__ import annotations

from fractions import Fraction

from lmilift.polyalg import Polynomial, parse_polynomial


def sos_convex_case(rng):
    """``p = sum c_k (a_k . (x - u))^(2j)`` with small integer ``a_k``: sos-convex, p(u) = 0, grad p(u) = 0."""
    n = int(rng.integers(1, 4))
    u = [Fraction(int(rng.integers(-2, 3)), 2) for _ in range(n)]
    z = [Polynomial.variable(i, n) - u[i] for i in range(n)]
    p = Polynomial.zero(n)
    for _ in range(int(rng.integers(1, 4))):
        a = [int(v) for v in rng.integers(-1, 2, n)]
        lin = sum((zi * ai for zi, ai in zip(z, a)), Polynomial.zero(n))
        j = int(rng.integers(1, 4))
        p = p + lin ** (2 * j) * Fraction(int(rng.integers(1, 4)), int(rng.integers(1, 3)))
    if p.is_zero():
        p = z[0] ** 2
    return p, u


def P(text, n=2):
    return parse_polynomial(text, n)


# (name, constraints, Schmudgen orders, Putinar orders)
MONOTONE_INSTANCES = [
    ("lens", [P("1 - x1^2 - x2^2"), P("x1 - x2^2")], (2, 3), (1, 2, 3)),
    ("quartic", [P("1 - x1^4 - x2^4")], (2, 3), (2, 3)),
    ("hyperbola-disk", [P("x1*x2 - 1/4"), P("1 - x1^2 - x2^2")], (2, 3), (1, 2, 3)),
]
