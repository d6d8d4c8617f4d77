from fractions import Fraction as F
from math import comb, inf

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lmilift.polyalg import (
    MatrixPolynomial,
    MonomialBasis,
    Polynomial,
    PolynomialSyntaxError,
    format_polynomial,
    gradient,
    half_degree,
    hessian,
    matpoly_norm,
    monomial_basis,
    parse_polynomial,
    poly_norm,
    product_g_nu,
    substitute_line,
)


def P(text, n=2):
    return parse_polynomial(text, n)


def x(i, n=2):
    return Polynomial.variable(i, n)


# -- evaluation ---------------------------------------------------------------


def test_eval_examples():
    assert P("1 - x1^4 - x2^4").eval([1, 0]) == 0
    assert Polynomial.zero(2).eval([F(3, 7), 5]) == 0
    assert P("x1*x2 - 1").eval([2, 3]) == 5


def test_eval_exact_on_rationals():
    v = P("1/3*x1^2 - x2").eval([F(1, 2), F(1, 5)])
    assert v == F(1, 12) - F(1, 5)
    assert isinstance(v, F)


def test_eval_dimension_mismatch():
    with pytest.raises(ValueError):
        P("x1 + x2").eval([1, 2, 3])
    with pytest.raises(ValueError):
        P("x1 + x2").eval_many(np.zeros((4, 3)))


def test_eval_many_matches_eval():
    p = P("3*x1^3*x2 - 2*x2^2 + 1/2")
    X = np.random.default_rng(0).uniform(-2, 2, (20, 2))
    assert np.allclose(p.eval_many(X), [float(p.eval(list(r))) for r in X])


# -- structure ----------------------------------------------------------------


def test_zero_polynomial_degree_sentinel():
    z = Polynomial.zero(3)
    assert z.degree == -inf
    assert z.is_zero()
    assert len(z) == 0


def test_no_stored_zero_coefficients():
    p = P("x1 + x2") - P("x2")
    assert dict(p.items()) == {(1, 0): 1}
    assert (P("x1^2") - P("x1^2")).is_zero()


def test_degree():
    assert P("x1^3*x2 + x2^2").degree == 4
    assert Polynomial.constant(5, 2).degree == 0


# -- calculus -----------------------------------------------------------------


def test_gradient_examples():
    assert gradient(P("x1*x2 - 1")) == (x(1), x(0))
    assert all(g.is_zero() for g in gradient(Polynomial.constant(7, 2)))
    assert gradient(P("1 - x1^4 - x2^4")) == (P("-4*x1^3"), P("-4*x2^3"))


def test_hessian_examples():
    H = hessian(P("x1*x2 - 1"))
    assert H.eval([0, 0]).tolist() == [[0, 1], [1, 0]]
    H = hessian(P("1 - x1^4 - x2^4"))
    assert H[0, 0] == P("-12*x1^2") and H[1, 1] == P("-12*x2^2") and H[0, 1].is_zero()


def test_matrix_polynomial_rejects_asymmetry():
    with pytest.raises(ValueError):
        MatrixPolynomial.from_rows([[x(0), x(1)], [x(0), x(0)]])


# -- bases --------------------------------------------------------------------


def test_monomial_basis_order():
    assert list(monomial_basis(2, 1)) == [(0, 0), (1, 0), (0, 1)]
    assert list(monomial_basis(2, 2)) == [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]
    assert len(monomial_basis(3, 4)) == 35


@pytest.mark.parametrize("n,N", [(1, 0), (1, 5), (2, 3), (3, 4), (4, 2)])
def test_basis_length_and_prefix(n, N):
    B = MonomialBasis(n, N)
    assert len(B) == comb(n + N, n)
    assert list(MonomialBasis(n, N + 1))[: len(B)] == list(B)
    assert B[0] == (0,) * n


# -- products and half degrees -----------------------------------------------


def test_product_g_nu():
    g1, g2 = x(0), x(1)
    assert product_g_nu([g1, g2], (0, 0)) == Polynomial.constant(1, 2)
    assert product_g_nu([g1, g2], (1, 1)) == P("x1*x2")
    with pytest.raises(ValueError):
        product_g_nu([g1, g2], (2, 0))


def test_half_degree():
    assert half_degree(P("x1^3 + 1")) == 2
    assert half_degree(Polynomial.constant(1, 2)) == 0
    assert half_degree(P("x1^2*x2^2")) == 2


# -- substitute_line ----------------------------------------------------------


def test_substitute_line_examples():
    n = 1
    sl = substitute_line(MatrixPolynomial.from_rows([[parse_polynomial("x1^2", 1)]]), [0])
    assert set(sl) == {2}
    assert sl[2][0, 0] == parse_polynomial("x1^2", 1)
    sl = substitute_line(MatrixPolynomial.from_rows([[parse_polynomial("x1", 1)]]), [1])
    assert sl[0][0, 0] == Polynomial.constant(1, n)
    assert sl[1][0, 0] == parse_polynomial("x1 - 1", 1)
    C = MatrixPolynomial.identity(2, 2)
    sl = substitute_line(C, [F(1, 3), 2])
    assert set(sl) == {0} and sl[0] == C


# -- norms --------------------------------------------------------------------


def test_poly_norm_examples():
    assert poly_norm(P("x1*x2")) == F(1, 2)
    assert poly_norm(Polynomial.constant(5, 2)) == 5
    assert poly_norm(P("x1^2 + x1*x2")) == 1


def test_matpoly_norm_examples():
    assert matpoly_norm(MatrixPolynomial.from_rows([[x(0), 0], [0, x(0)]])) == 1.0
    xy = P("x1*x2")
    assert matpoly_norm(MatrixPolynomial.from_rows([[0, xy], [xy, 0]])) == 0.5
    p = P("3*x1^2*x2 - 7*x2")
    assert matpoly_norm(MatrixPolynomial.from_rows([[p]])) == float(poly_norm(p))


# -- text format --------------------------------------------------------------


def test_parse_and_format():
    p = P("2.5*x1^2 - 1/3*x1*x2 + (x2 - 1)^2")
    assert p.coeff((2, 0)) == F(5, 2)
    assert p.coeff((1, 1)) == F(-1, 3)
    assert p.coeff((0, 0)) == 1
    assert parse_polynomial(format_polynomial(p), 2) == p


def test_parse_error_reports_column():
    with pytest.raises(PolynomialSyntaxError) as e:
        parse_polynomial("x1 + $x2", 2)
    assert e.value.pos == 5


def test_parse_rejects_unknown_variable():
    with pytest.raises(ValueError):
        parse_polynomial("x3 + 1", 2)


# -- properties ---------------------------------------------------------------

coeffs = st.fractions(min_value=-10, max_value=10, max_denominator=7)


@st.composite
def polynomials(draw, n=2, max_deg=4):
    exps = draw(st.lists(st.tuples(*[st.integers(0, max_deg)] * n), max_size=6))
    terms = {e: draw(coeffs) for e in exps if sum(e) <= max_deg}
    return Polynomial(terms, n)


points = st.lists(st.fractions(min_value=-3, max_value=3, max_denominator=5), min_size=2, max_size=2)


@settings(max_examples=60, deadline=None)
@given(polynomials(), polynomials(), points)
def test_eval_is_a_ring_homomorphism(p, q, pt):
    assert (p * q).eval(pt) == p.eval(pt) * q.eval(pt)
    assert (p + q).eval(pt) == p.eval(pt) + q.eval(pt)


@settings(max_examples=40, deadline=None)
@given(polynomials())
def test_hessian_is_jacobian_of_gradient(p):
    H = hessian(p)
    grad = gradient(p)
    for i in range(2):
        for j in range(2):
            assert H[i, j] == grad[i].diff(j)


@settings(max_examples=40, deadline=None)
@given(polynomials(), coeffs)
def test_poly_norm_homogeneous(p, c):
    assert poly_norm(p * c) == abs(c) * poly_norm(p)


@settings(max_examples=40, deadline=None)
@given(polynomials())
def test_format_round_trip(p):
    assert parse_polynomial(format_polynomial(p), 2) == p


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(11)
    h = 1e-6
    for _ in range(25):
        n = int(rng.integers(1, 5))
        terms = {}
        for _ in range(6):
            e = tuple(int(v) for v in rng.integers(0, 3, n))
            if sum(e) <= 6:
                terms[e] = F(int(rng.integers(-10, 11)))
        p = Polynomial(terms, n).to_float()
        pt = rng.uniform(-1, 1, n)
        grad = np.array([float(g.eval(list(pt))) for g in gradient(p)])
        fd = np.array([
            (float(p.eval(list(pt + h * e))) - float(p.eval(list(pt - h * e)))) / (2 * h) for e in np.eye(n)
        ])
        scale = max(1.0, np.max(np.abs(grad)))
        assert np.max(np.abs(fd - grad)) / scale <= 1e-5
