from fractions import Fraction as F

import numpy as np
import pytest

from lmilift.polyalg import MatrixPolynomial, Polynomial, parse_polynomial
from lmilift.soscert import (
    CertificateError,
    KKTError,
    SosStatus,
    biform,
    biform_basis,
    double_integral,
    hessian_form,
    hessian_sos_certificate,
    kkt_multipliers,
    lagrange_decompose,
    sos_check,
    sos_concave_check,
    sos_matrix_check,
)
from cases import sos_convex_case


def P(text, n=2):
    return parse_polynomial(text, n)


def test_sos_check_positive_examples():
    for text in ["x1^2 + x2^2", "(x1 - x2)^2 + 1", "x1^4 - 2*x1^2*x2 + x2^2"]:
        res = sos_check(P(text))
        assert res.is_sos
        assert res.certificate.valid


def test_sos_check_rejects_non_sos():
    assert sos_check(P("x1^3 + 1")).status == SosStatus.NOT_SOS
    assert sos_check(P("x1*x2")).status == SosStatus.NOT_SOS
    assert sos_check(P("-1 - x1^2")).status == SosStatus.NOT_SOS


def test_gram_reconstructs_target():
    p = P("2*x1^2 + 2*x1*x2 + 3*x2^2 + 1")
    cert = sos_check(p).certificate
    assert cert.residual <= 1e-8
    assert cert.min_eig >= -1e-9


def test_diagonal_matrix_sos():
    x1, x2 = Polynomial.variable(0, 2), Polynomial.variable(1, 2)
    Pm = MatrixPolynomial.from_rows([[x1 * x1 * 12, 0], [0, x2 * x2 * 12]])
    res = sos_matrix_check(Pm)
    assert res.is_sos and res.certificate.residual <= 1e-7


def test_indefinite_matrix_not_sos():
    Pm = MatrixPolynomial.from_rows([[0, -1], [-1, 0]])
    assert sos_matrix_check(Pm).status == SosStatus.NOT_SOS


def test_biform_and_basis():
    x1 = Polynomial.variable(0, 1)
    Pm = MatrixPolynomial.from_rows([[x1 * x1, 0], [0, Polynomial.constant(1, 1)]])
    b = biform(Pm)
    assert b.nvars == 3
    assert b == P("x1^2*x2^2 + x3^2", 3)
    assert biform_basis(1, 2, 1) == [(0, 1, 0), (1, 1, 0), (0, 0, 1), (1, 0, 1)]


def test_sos_concave_classification():
    assert sos_concave_check(P("1 - x1^4 - x2^4")).is_sos
    assert sos_concave_check(P("1 - x1^2 - x2^2")).is_sos
    assert not sos_concave_check(P("x1*x2 - 1")).is_sos


def test_double_integral_constant_and_linear():
    C = MatrixPolynomial.from_rows([[2, 0], [0, 4]])
    assert double_integral(C, [F(1, 3)]) == C * F(1, 2)
    # for x1: int_0^1 int_0^t (u + s(x - u)) ds dt = u/2 + (x - u)/6 at u = 0
    L = MatrixPolynomial.from_rows([[Polynomial.variable(0, 1)]])
    assert double_integral(L, [0])[0, 0] == P("1/6*x1", 1)


def test_taylor_identity_exact():
    p = P("(x1 - 1/2)^4 + (x1 - 1/2)^2*(x2 + 1)^2 + 3*(x2 + 1)^2")
    _, resid = hessian_form(p, [F(1, 2), -1])
    assert resid.is_zero()


@pytest.mark.parametrize("seed", range(5))
def test_hessian_certificate_on_generated_cases(seed):
    p, u = sos_convex_case(np.random.default_rng(seed))
    _, resid = hessian_form(p, u)
    assert resid.is_zero()
    cert = hessian_sos_certificate(p, u)
    assert cert.residual <= 1e-7 and cert.min_eig >= -1e-9


def test_hessian_certificate_requires_stationary_zero():
    with pytest.raises(CertificateError):
        hessian_sos_certificate(P("x1^2 + 1"), [0, 0])
    with pytest.raises(CertificateError):
        hessian_sos_certificate(P("x1^2 + x2"), [0, 0])


# -- Lagrange decomposition ---------------------------------------------------


def test_disk_decomposition_exact():
    g = [P("1 - x1^2 - x2^2")]
    d = lagrange_decompose(g, [1, 0], [-1, 0], [F(1, 2)])
    assert d.exact and d.residual == 0
    assert d.f_ell == P("1/2*(x1 + 1)^2 + 1/2*x2^2")


@pytest.mark.parametrize("ell,u", [((1, 0), (-1, 0)), ((0, -1), (0, 1)), ((-1, 0), (1, 0))])
def test_quartic_decomposition_exact(ell, u):
    d = lagrange_decompose([P("1 - x1^4 - x2^4")], ell, u, [F(1, 4)])
    assert d.exact and d.residual == 0
    assert d.stationarity == 0 and d.complementarity == 0


def test_decomposition_rejects_wrong_multiplier():
    with pytest.raises(KKTError):
        lagrange_decompose([P("1 - x1^2 - x2^2")], [1, 0], [-1, 0], [F(1, 3)])
    with pytest.raises(KKTError):
        lagrange_decompose([P("1 - x1^2 - x2^2")], [1, 0], [-1, 0], [F(-1, 2)])


def test_kkt_multipliers_recovered():
    gs = [P("1 - x1^2 - x2^2"), P("x1 + 2")]
    lam, res = kkt_multipliers(gs, [0.6, 0.8], [-0.6, -0.8])
    assert res <= 1e-12
    assert lam == pytest.approx([0.5, 0.0])
