"""Sum-of-squares certificates.

Scalar SOS uses a Gram matrix over the full monomial basis of degree
``ceil(deg/2)``. Matrix SOS of ``P(x)`` is tested on the biform
``xi^T P(x) xi`` with basis ``{xi_i x^beta}``. The double-integral helpers
give the constructive identity ``p(x) = (x-u)^T F(x) (x-u)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.optimize import nnls

from .polyalg import (
    Exponent,
    MatrixPolynomial,
    Polynomial,
    add_exp,
    exponents_upto,
    gradient,
    half_degree,
    hessian,
    substitute_line,
)
from .sdpcore import ConicProblem, SolverOptions, Status, solve

RESIDUAL_TOL = 1e-7
MIN_EIG_TOL = -1e-9
NOT_SOS_MARGIN = 1e-7
GRAM_SOLVER_OPTIONS = SolverOptions(tol=1e-10)


class SosStatus(str, enum.Enum):
    SOS = "SOS"
    NOT_SOS = "NOT_SOS"
    UNDECIDED = "UNDECIDED"
    SOLVER_FAILURE = "SOLVER_FAILURE"


class CertificateError(ValueError):
    pass


@dataclass
class GramCertificate:
    basis: list[Exponent]
    gram: np.ndarray
    target: Polynomial | MatrixPolynomial
    residual: float
    min_eig: float

    def to_dict(self) -> dict:
        return {
            "basis": [list(a) for a in self.basis],
            "gram": [float(v) for v in self.gram.reshape(-1)],
            "residual": float(self.residual),
            "min_eig": float(self.min_eig),
        }

    @property
    def valid(self) -> bool:
        return self.residual <= RESIDUAL_TOL and self.min_eig >= MIN_EIG_TOL


@dataclass
class SosResult:
    status: SosStatus
    certificate: GramCertificate | None = None
    # trace-normalized infeasibility margin when the Gram SDP is infeasible
    margin: float = float("nan")
    reason: str = ""

    @property
    def is_sos(self) -> bool:
        return self.status == SosStatus.SOS


def _gram_residual(target: Polynomial, basis: Sequence[Exponent], Q: np.ndarray) -> float:
    recon: dict[Exponent, float] = {}
    for i, bi in enumerate(basis):
        for j, bj in enumerate(basis):
            if Q[i, j] != 0:
                a = add_exp(bi, bj)
                recon[a] = recon.get(a, 0.0) + Q[i, j]
    keys = set(recon) | {a for a, _ in target.items()}
    return max((abs(recon.get(a, 0.0) - float(target.coeff(a))) for a in keys), default=0.0)


def _reduce_basis(target: Polynomial, basis: Sequence[Exponent]) -> list[int]:
    """Drop basis elements whose diagonal Gram entry is forced to zero."""
    active = set(range(len(basis)))
    changed = True
    while changed:
        changed = False
        for i in sorted(active):
            sq = add_exp(basis[i], basis[i])
            if target.coeff(sq) != 0:
                continue
            others = [
                (j, k)
                for j in active
                for k in active
                if j <= k and (j, k) != (i, i) and add_exp(basis[j], basis[k]) == sq
            ]
            if not others:
                active.discard(i)
                changed = True
    return sorted(active)


def gram_feasibility(
    target: Polynomial, basis: Sequence[Exponent], opts: SolverOptions | None = None
) -> SosResult:
    """Find ``Q >= 0`` with ``basis^T Q basis == target``."""
    basis = [tuple(a) for a in basis]
    keep = _reduce_basis(target, basis)
    pairs: dict[Exponent, list[tuple[int, int]]] = {}
    for a_pos, i in enumerate(keep):
        for j in keep[a_pos:]:
            pairs.setdefault(add_exp(basis[i], basis[j]), []).append((i, j))
    for alpha, c in target.items():
        if alpha not in pairs:
            return SosResult(SosStatus.NOT_SOS, margin=math.inf, reason=f"monomial {alpha} cannot be represented")

    local = {b: k for k, b in enumerate(keep)}
    r = len(keep)
    # solve for the Gram of target / scale
    scale = target.max_abs_coeff() or 1.0
    A0 = np.zeros((r, r))
    cols = []
    for alpha, plist in pairs.items():
        c = float(target.coeff(alpha)) / scale
        i0, j0 = plist[0]
        w0 = 1.0 if i0 == j0 else 2.0
        a, b = local[i0], local[j0]
        A0[a, b] = A0[b, a] = c / w0
        for i, j in plist[1:]:
            w = 1.0 if i == j else 2.0
            M = np.zeros((r, r))
            M[local[i], local[j]] = M[local[j], local[i]] = 1.0
            M[a, b] = M[b, a] = -w / w0
            cols.append(M)
    nfree = len(cols)
    if r == 0:
        Q = np.zeros((len(basis), len(basis)))
        res = _gram_residual(target, basis, Q)
        return SosResult(SosStatus.SOS, GramCertificate(basis, Q, target, res, 0.0))
    block = np.concatenate([A0[None], np.array(cols).reshape(nfree, r, r)], axis=0)
    prob = ConicProblem(nfree, np.zeros(nfree), [block], "gram")
    sol = solve(prob, opts or GRAM_SOLVER_OPTIONS)
    if sol.status == Status.INFEASIBLE:
        Z = sol.certificate[0]
        margin = 1.0 / float(np.trace(Z))
        status = SosStatus.NOT_SOS if margin >= NOT_SOS_MARGIN else SosStatus.UNDECIDED
        return SosResult(status, margin=margin, reason="Gram SDP infeasible")
    if sol.status != Status.OPTIMAL:
        return SosResult(SosStatus.SOLVER_FAILURE, reason=f"solver status {sol.status.value}")
    Qr = prob.slack(sol.y)[0]
    w, V = np.linalg.eigh(Qr)
    Qr = (V * np.maximum(w, 0.0)) @ V.T
    Qr = (Qr + Qr.T) / 2 * scale
    Q = np.zeros((len(basis), len(basis)))
    Q[np.ix_(keep, keep)] = Qr
    res = _gram_residual(target, basis, Q)
    min_eig = float(np.linalg.eigvalsh(Q)[0])
    cert = GramCertificate(basis, Q, target, res, min_eig)
    if not cert.valid:
        return SosResult(SosStatus.UNDECIDED, cert, reason=f"residual {res:.2e} after PSD projection")
    return SosResult(SosStatus.SOS, cert)


def sos_check(p: Polynomial, opts: SolverOptions | None = None) -> SosResult:
    """Gram-matrix SOS test over the full basis of degree ``ceil(deg p / 2)``."""
    if p.is_zero():
        return gram_feasibility(p, exponents_upto(p.nvars, 0), opts)
    if int(p.degree) % 2:
        return SosResult(SosStatus.NOT_SOS, margin=math.inf, reason="odd degree")
    basis = exponents_upto(p.nvars, half_degree(p))
    return gram_feasibility(p, basis, opts)


def biform(P: MatrixPolynomial) -> Polynomial:
    """``xi^T P(x) xi`` in the ring ``(x_1..x_n, xi_1..xi_r)``."""
    n, r = P.nvars, P.dim
    xi = [Polynomial.variable(n + i, n + r) for i in range(r)]
    total = Polynomial.zero(n + r)
    for i in range(r):
        for j in range(r):
            e = P[i, j]
            if not e.is_zero():
                total = total + xi[i] * xi[j] * e.extend(n + r)
    return total


def biform_basis(n: int, r: int, d: int) -> list[Exponent]:
    """``{xi_i x^beta : |beta| <= d}``, ordered by ``i`` then graded-lex ``beta``."""
    out = []
    for i in range(r):
        e = [0] * r
        e[i] = 1
        for beta in exponents_upto(n, d):
            out.append(beta + tuple(e))
    return out


def sos_matrix_check(P: MatrixPolynomial, opts: SolverOptions | None = None) -> SosResult:
    """Matrix SOS test via the biform (xi-degree exactly one in every basis element)."""
    deg = P.degree
    if deg != -math.inf and int(deg) % 2:
        return SosResult(SosStatus.NOT_SOS, margin=math.inf, reason="odd degree entry")
    d = 0 if deg == -math.inf else int(deg) // 2
    return gram_feasibility(biform(P), biform_basis(P.nvars, P.dim, d), opts)


def sos_concave_check(g: Polynomial, opts: SolverOptions | None = None) -> SosResult:
    """``g`` is sos-concave when ``-hessian(g)`` is a matrix SOS."""
    return sos_matrix_check(-hessian(g), opts)


def double_integral(P: MatrixPolynomial, u: Sequence) -> MatrixPolynomial:
    """``int_0^1 int_0^t P(u + s(x - u)) ds dt``, exact over the rationals."""
    slices = substitute_line(P, u)
    out = MatrixPolynomial.zeros(P.dim, P.nvars)
    for k, Pk in slices.items():
        out = out + Pk * Fraction(1, (k + 1) * (k + 2))
    return out


def _shift_vector(u, n) -> list[Polynomial]:
    return [Polynomial.variable(i, n) - u[i] for i in range(n)]


def _to_exact(v):
    return [x if isinstance(x, Fraction) else Fraction(x) for x in v]


def hessian_form(p: Polynomial, u: Sequence) -> tuple[MatrixPolynomial, Polynomial]:
    """``F = DI(hess p, u)`` and the residual ``p - (x-u)^T F (x-u)``."""
    F = double_integral(hessian(p), u)
    rec = F.quadratic_form(_shift_vector(u, p.nvars))
    return F, p - rec


def hessian_sos_certificate(p: Polynomial, u: Sequence, opts: SolverOptions | None = None) -> GramCertificate:
    """Gram certificate for ``p`` built from ``p = (x-u)^T DI(hess p, u) (x-u)``.

    Requires ``p(u) = 0``, ``grad p(u) = 0`` and a matrix-SOS Hessian.
    """
    n = p.nvars
    exact = p.is_exact() and all(isinstance(v, (int, Fraction)) for v in u)
    u = _to_exact(u) if exact else [float(v) for v in u]
    val = p.eval(u)
    if (val != 0) if exact else abs(val) > 1e-10:
        raise CertificateError(f"p(u) = {float(val):.3e} is not zero")
    gnorm = max(abs(float(gi.eval(u))) for gi in gradient(p))
    if (gnorm != 0) if exact else gnorm > 1e-10:
        raise CertificateError(f"gradient at u has size {gnorm:.3e}")
    hres = sos_matrix_check(hessian(p), opts)
    if not hres.is_sos:
        raise CertificateError(f"Hessian is not certified SOS ({hres.status.value})")
    F, resid = hessian_form(p, u)
    if resid.max_abs_coeff() > (0 if exact else 1e-8):
        raise CertificateError(f"Taylor identity residual {resid.max_abs_coeff():.3e}")
    fres = sos_matrix_check(F, opts)
    if not fres.is_sos:
        raise CertificateError(f"double integral is not certified SOS ({fres.status.value})")
    fc = fres.certificate
    # substitute xi = x - u in every basis element xi_i x^beta
    d = half_degree(p)
    pbasis = list(exponents_upto(n, d))
    pos = {a: k for k, a in enumerate(pbasis)}
    T = np.zeros((len(fc.basis), len(pbasis)))
    shift = _shift_vector(u, n)
    for k, elem in enumerate(fc.basis):
        beta, xi = elem[:n], elem[n:]
        i = xi.index(1)
        z = shift[i] * Polynomial.monomial(beta)
        for alpha, c in z.items():
            T[k, pos[alpha]] += float(c)
    G = T.T @ fc.gram @ T
    G = (G + G.T) / 2
    res = _gram_residual(p, pbasis, G)
    cert = GramCertificate(pbasis, G, p, res, float(np.linalg.eigvalsh(G)[0]))
    if not cert.valid:
        raise CertificateError(f"assembled certificate invalid (residual {res:.2e}, min eig {cert.min_eig:.2e})")
    return cert


# ---------------------------------------------------------------------------
# Lagrange decomposition


@dataclass
class LagrangeData:
    ell: list
    ell_star: object
    u: list
    lam: list
    F: list[MatrixPolynomial]
    f_ell: Polynomial
    residual: float
    stationarity: float = 0.0
    complementarity: float = 0.0
    exact: bool = field(default=False)


class KKTError(ValueError):
    pass


def kkt_multipliers(gs: Sequence[Polynomial], ell, u, active_tol: float = 1e-6) -> tuple[np.ndarray, float]:
    """Nonnegative ``lam`` with ``ell = sum lam_i grad g_i(u)`` over active constraints.

    Returns the multipliers and the stationarity residual.
    """
    u = [float(v) for v in u]
    ell = np.asarray(ell, dtype=float)
    m = len(gs)
    active = [i for i, g in enumerate(gs) if float(g.eval(u)) <= active_tol]
    lam = np.zeros(m)
    if not active:
        return lam, float(np.linalg.norm(ell))
    J = np.array([[float(d.eval(u)) for d in gradient(gs[i])] for i in active]).T
    coef, res = nnls(J, ell)
    lam[active] = coef
    return lam, float(res)


def lagrange_decompose(
    gs: Sequence[Polynomial], ell, u, lam, tol: float = 1e-8
) -> LagrangeData:
    """Verify ``f_ell = ell^T x - ell^* - sum lam_i g_i = sum lam_i (x-u)^T F_i (x-u)``."""
    n = gs[0].nvars
    exact = all(g.is_exact() for g in gs) and all(
        isinstance(v, (int, Fraction)) for v in list(ell) + list(u) + list(lam)
    )
    conv = _to_exact if exact else (lambda v: [float(t) for t in v])
    ell, u, lam = conv(ell), conv(u), conv(lam)
    if any(l < 0 for l in lam):
        raise KKTError("multipliers must be nonnegative")
    grads = [[d.eval(u) for d in gradient(g)] for g in gs]
    stat = max(abs(float(ell[k] - sum(lam[i] * grads[i][k] for i in range(len(gs))))) for k in range(n))
    comp = max((abs(float(lam[i] * gs[i].eval(u))) for i in range(len(gs))), default=0.0)
    ell_star = sum(ell[k] * u[k] for k in range(n))
    x = [Polynomial.variable(k, n) for k in range(n)]
    f = sum((x[k] * ell[k] for k in range(n)), Polynomial.zero(n)) - ell_star
    for li, g in zip(lam, gs):
        f = f - g * li
    shift = _shift_vector(u, n)
    Fs = []
    rec = Polynomial.zero(n)
    for li, g in zip(lam, gs):
        if li == 0:
            Fs.append(MatrixPolynomial.zeros(n, n))
            continue
        Fi = double_integral(-hessian(g), u)
        Fs.append(Fi)
        rec = rec + Fi.quadratic_form(shift) * li
    residual = (f - rec).max_abs_coeff()
    if residual > tol:
        raise KKTError(
            f"identity residual {residual:.3e} (stationarity {stat:.2e}, complementarity {comp:.2e})"
        )
    return LagrangeData(list(ell), ell_star, list(u), list(lam), Fs, f, residual, stat, comp, exact)
