"""Strictly concave reparametrizations of defining polynomials.

All "for every x in S" statements are checked on a :class:`RegionSampler`
(grid plus scrambled Sobol points); reported margins carry the grid size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from scipy.stats import qmc

from .polyalg import Polynomial, exponents_upto, gradient, hessian

MEMBER_TOL = 1e-12
HESSIAN_MARGIN = 1e-8
M_MARGIN = 1e-6
M_SCHEDULE = tuple(Fraction(2) ** k / 4 for k in range(0, 23))  # 1/4 .. 2^20
PHI_GRID = 1001
PHI_MAX_DEGREE = 200


class ReparamError(RuntimeError):
    pass


class RegionSampler:
    """Sample points of ``S = {g_i >= 0}`` inside a bounding box."""

    def __init__(
        self,
        gs: Sequence[Polynomial],
        box: Sequence[Sequence[float]],
        resolution: int = 101,
        n_quasi: int = 10_000,
        seed: int = 0,
    ):
        self.gs = list(gs)
        self.box = np.asarray(box, dtype=float)
        self.n = self.box.shape[0]
        if self.box.shape != (self.n, 2) or np.any(self.box[:, 0] >= self.box[:, 1]):
            raise ValueError("box must be a list of (low, high) pairs with low < high")
        self.resolution = int(resolution)
        self.n_quasi = int(n_quasi)
        self.seed = seed
        self._points: np.ndarray | None = None

    def grid(self, resolution: int | None = None) -> np.ndarray:
        res = resolution or self.resolution
        axes = [np.linspace(lo, hi, res) for lo, hi in self.box]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=1)

    def accept(self, X: np.ndarray) -> np.ndarray:
        ok = np.ones(X.shape[0], dtype=bool)
        for g in self.gs:
            ok &= g.eval_many(X) >= 0
        return X[ok]

    def quasi_random(self) -> np.ndarray:
        if self.n_quasi <= 0:
            return np.zeros((0, self.n))
        m = int(math.ceil(math.log2(self.n_quasi)))
        sob = qmc.Sobol(self.n, scramble=True, seed=self.seed).random_base2(m)[: self.n_quasi]
        return qmc.scale(sob, self.box[:, 0], self.box[:, 1])

    @property
    def points(self) -> np.ndarray:
        if self._points is None:
            pts = self.accept(np.vstack([self.grid(), self.quasi_random()]))
            if pts.shape[0] == 0:
                raise ReparamError("no sample of the box satisfies the constraints")
            self._points = pts
        return self._points

    def grid_points(self, resolution: int | None = None) -> np.ndarray:
        return self.accept(self.grid(resolution))

    def touches_box(self, resolution: int | None = None) -> bool:
        """True if an accepted grid point lies on the boundary shell of the box."""
        pts = self.grid_points(resolution)
        on_lo = np.isclose(pts, self.box[:, 0])
        on_hi = np.isclose(pts, self.box[:, 1])
        return bool(np.any(on_lo | on_hi))

    def describe(self) -> str:
        return f"{self.resolution}^{self.n} grid + {self.n_quasi} Sobol points"


def polynomial_hessians(p: Polynomial, X: np.ndarray) -> np.ndarray:
    return hessian(p).eval_many(X)


def polynomial_gradients(p: Polynomial, X: np.ndarray) -> np.ndarray:
    return np.stack([d.eval_many(X) for d in gradient(p)], axis=1)


def scale_to_unit(g: Polynomial, sampler: RegionSampler, pad: float = 1e-3) -> tuple[Polynomial, Fraction]:
    """Divide ``g`` by ``(1 + pad) * max_samples g`` so it takes values in [0, 1] on S."""
    vals = g.eval_many(sampler.points)
    if vals.min() < -MEMBER_TOL:
        raise ReparamError(f"g is negative ({vals.min():.3e}) on a sample of S")
    top = float(vals.max())
    if top <= 0:
        raise ReparamError("g vanishes on every sample")
    factor = Fraction(top) * (1 + Fraction(pad))
    return g * (1 / factor), factor


@dataclass
class ModifiedHessianCheck:
    M: Fraction
    passed: bool
    min_eig: float
    worst_point: np.ndarray


def modified_hessian_check(g: Polynomial, sampler: RegionSampler, M, margin: float = M_MARGIN) -> ModifiedHessianCheck:
    """Is ``-hess g + M grad g grad g^T`` >= margin on every sample?"""
    X = sampler.points
    H = -polynomial_hessians(g, X)
    D = polynomial_gradients(g, X)
    mod = H + float(M) * D[:, :, None] * D[:, None, :]
    eigs = np.linalg.eigvalsh(mod)[:, 0]
    k = int(np.argmin(eigs))
    return ModifiedHessianCheck(Fraction(M), bool(eigs[k] >= margin), float(eigs[k]), X[k])


def modified_hessian_M(g: Polynomial, sampler: RegionSampler, margin: float = M_MARGIN) -> Fraction | None:
    """Smallest scheduled ``M`` (1/4, 1/2, ..., 2^20) passing the grid check; ``None`` if none does."""
    X = sampler.points
    H = -polynomial_hessians(g, X)
    D = polynomial_gradients(g, X)
    outer = D[:, :, None] * D[:, None, :]
    for M in M_SCHEDULE:
        if np.linalg.eigvalsh(H + float(M) * outer)[:, 0].min() >= margin:
            return M
    return None


@dataclass
class PhiPolynomial:
    M: Fraction
    coeffs: list[Fraction]
    # worst values of phi, phi + t phi', and (-M - ratio) on the grid
    margins: tuple[float, float, float]
    ratio_bound: Fraction
    grid_points: int = PHI_GRID

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def as_polynomial(self) -> Polynomial:
        return Polynomial({(k,): c for k, c in enumerate(self.coeffs)}, 1)

    def __call__(self, t):
        return np.polynomial.polynomial.polyval(t, [float(c) for c in self.coeffs])

    def compose(self, g: Polynomial) -> Polynomial:
        """``phi(g)`` by Horner's rule, exact."""
        out = Polynomial.constant(self.coeffs[-1], g.nvars)
        for c in reversed(self.coeffs[:-1]):
            out = out * g + c
        return out


def psi_coefficients(M, degree: int) -> list[Fraction]:
    """Taylor coefficients ``(-(M+1))^k / (k+1)!`` of ``(1 - exp(-(M+1)t)) / ((M+1)t)``."""
    rate = Fraction(M) + 1
    return [(-rate) ** k / math.factorial(k + 1) for k in range(degree + 1)]


def phi_conditions(coeffs: Sequence, M, grid: int = PHI_GRID) -> tuple[float, float, float]:
    """Worst ``phi``, ``phi + t phi'`` and ``-M - (2 phi' + t phi'') / (phi + t phi')`` on [0, 1]."""
    t = np.linspace(0.0, 1.0, grid)
    c = np.array([float(v) for v in coeffs])
    P = np.polynomial.Polynomial(c)
    d1, d2 = P.deriv(), P.deriv(2)
    phi = P(t)
    q = phi + t * d1(t)
    r = 2 * d1(t) + t * d2(t)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(q > 0, r / q, np.inf)
    return float(phi.min()), float(q.min()), float(-float(M) - ratio.max())


def phi_polynomial(M, ratio_bound=None, max_degree: int = PHI_MAX_DEGREE) -> PhiPolynomial:
    """Truncate the series of ``psi`` until all three conditions hold on a 1001-point grid.

    The conditions are ``phi > 0``, ``phi + t phi' > 0`` and
    ``(2 phi' + t phi'') / (phi + t phi') <= -ratio_bound`` (default ``M``).
    """
    M = Fraction(M)
    if M <= 0:
        raise ValueError("M must be positive")
    bound = M if ratio_bound is None else Fraction(ratio_bound)
    for deg in range(1, max_degree + 1):
        coeffs = psi_coefficients(M, deg)
        m1, m2, m3 = phi_conditions(coeffs, bound)
        if m1 > 0 and m2 > 0 and m3 > 0:
            return PhiPolynomial(M, coeffs, (m1, m2, m3), bound)
    raise ReparamError(
        f"no truncation up to degree {max_degree} satisfies the conditions for M={float(M)}; "
        "double precision is insufficient, use a smaller M or exact evaluation"
    )


@dataclass
class ReparamResult:
    g: Polynomial
    g_scaled: Polynomial
    scale: Fraction
    M: Fraction
    phi: PhiPolynomial
    h: Polynomial
    p: Polynomial
    hessian_min_eig: float
    h_min: float
    grid_resolution: int
    samples: int

    def report(self) -> dict:
        return {
            "M": float(self.M),
            "phi_degree": self.phi.degree,
            "phi_margins": [float(v) for v in self.phi.margins],
            "hessian_min_eig_over_grid": float(self.hessian_min_eig),
            "grid_resolution": self.grid_resolution,
        }


def concave_reparam(g: Polynomial, sampler: RegionSampler, M=None) -> ReparamResult:
    """``p = g~ * phi(g~)`` with ``g~`` scaled into [0, 1], strictly concave on the samples.

    The series parameter is ``M - 1/2`` so the exact series has ratio
    ``-(M + 1/2)`` and the truncation only has to certify ``-M``.
    """
    gs, scale = scale_to_unit(g, sampler)
    if M is None:
        M = modified_hessian_M(gs, sampler)
        if M is None:
            raise ReparamError("no scheduled M makes the modified Hessian positive definite on S")
    M = Fraction(M)
    series_M = max(M - Fraction(1, 2), Fraction(1, 4))
    phi = phi_polynomial(series_M, ratio_bound=M)
    h = phi.compose(gs)
    p = gs * h
    X = sampler.points
    hv = h.eval_many(X)
    eigs = np.linalg.eigvalsh(-polynomial_hessians(p, X))[:, 0]
    k = int(np.argmin(eigs))
    if hv.min() <= 0:
        raise ReparamError(f"h = phi(g) is not positive on S (min {hv.min():.3e} at {X[int(np.argmin(hv))]})")
    if eigs[k] < HESSIAN_MARGIN:
        raise ReparamError(f"-hess p has eigenvalue {eigs[k]:.3e} < {HESSIAN_MARGIN} at {X[k]}")
    return ReparamResult(g, gs, scale, M, phi, h, p, float(eigs[k]), float(hv.min()), sampler.resolution, X.shape[0])


# ---------------------------------------------------------------------------
# Minkowski-functional defining functions

Membership = Callable[[np.ndarray], np.ndarray]


def polynomial_membership(gs: Sequence[Polynomial]) -> Membership:
    def member(X):
        X = np.atleast_2d(X)
        ok = np.ones(X.shape[0], dtype=bool)
        for g in gs:
            ok &= g.eval_many(X) >= 0
        return ok

    return member


def minkowski_alpha_many(member: Membership, X, tol: float = 1e-10, max_bisect: int = 200) -> np.ndarray:
    """Gauge ``alpha(x) = inf {t > 0 : x / t in T}`` by bisection, row-wise."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    norms = np.linalg.norm(X, axis=1)
    out = np.zeros(X.shape[0])
    idx = np.nonzero(norms > 0)[0]
    if idx.size == 0:
        return out
    Y = X[idx]
    hi = np.ones(idx.size)
    for _ in range(2000):
        bad = ~member(Y / hi[:, None])
        if not bad.any():
            break
        hi[bad] *= 2
    else:
        raise ReparamError("membership oracle never accepts along a ray; is T bounded away from the origin?")
    lo = hi / 2
    for _ in range(2000):
        inside = member(Y / lo[:, None])
        if not inside.any():
            break
        hi[inside] = lo[inside]
        lo[inside] /= 2
        if np.any(lo[inside] < 1e-300):
            raise ReparamError("origin is not interior: ray never leaves T")
    # invariant: x/lo outside, x/hi inside
    for _ in range(max_bisect):
        width = hi - lo
        if np.all(width <= tol * np.maximum(1.0, hi)):
            break
        mid = (lo + hi) / 2
        inside = member(Y / mid[:, None])
        hi = np.where(inside, mid, hi)
        lo = np.where(inside, lo, mid)
    else:
        raise ReparamError(f"bisection did not converge in {max_bisect} steps")
    out[idx] = hi
    return out


def minkowski_alpha(member: Membership, x, tol: float = 1e-10, max_bisect: int = 200) -> float:
    return float(minkowski_alpha_many(member, np.asarray(x, dtype=float)[None, :], tol, max_bisect)[0])


def fd_hessian(f: Callable[[np.ndarray], np.ndarray], x: np.ndarray, h: float = 1e-3) -> np.ndarray:
    """Central-difference Hessian of a vectorized scalar function."""
    n = x.size
    E = np.eye(n) * h
    pts = [x]
    for i in range(n):
        pts += [x + E[i], x - E[i]]
        for j in range(i + 1, n):
            pts += [x + E[i] + E[j], x + E[i] - E[j], x - E[i] + E[j], x - E[i] - E[j]]
    vals = f(np.array(pts))
    f0 = vals[0]
    H = np.zeros((n, n))
    k = 1
    for i in range(n):
        fp, fm = vals[k], vals[k + 1]
        k += 2
        H[i, i] = (fp - 2 * f0 + fm) / h**2
        for j in range(i + 1, n):
            fpp, fpm, fmp, fmm = vals[k : k + 4]
            k += 4
            H[i, j] = H[j, i] = (fpp - fpm - fmp + fmm) / (4 * h**2)
    return H


@dataclass
class SmoothDefining:
    member: Membership
    eps: float
    max_hessian_eig: float = float("nan")
    tol: float = 1e-12

    def __call__(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        a = minkowski_alpha_many(self.member, X, tol=self.tol)
        return (1 - self.eps * np.sum(X**2, axis=1)) * (1 - a**3)

    def hessian(self, x, h: float = 1e-3) -> np.ndarray:
        return fd_hessian(self, np.asarray(x, dtype=float), h)


EPS_SCHEDULE = (1e-1, 1e-2, 1e-3)


def smooth_concave_defining(
    member: Membership, samples=None, eps: float | None = None, margin: float = 1e-6
) -> SmoothDefining:
    """``G(x) = (1 - eps |x|^2)(1 - alpha(x)^3)`` with a finite-difference concavity check.

    With ``eps=None`` the schedule 1e-1, 1e-2, 1e-3 is searched for the first
    value whose Hessian is below ``-margin`` at every sample.
    """
    if samples is None:
        if eps is None:
            raise ValueError("need samples to search eps")
        return SmoothDefining(member, eps)
    samples = np.atleast_2d(samples)
    for e in [eps] if eps is not None else EPS_SCHEDULE:
        G = SmoothDefining(member, e)
        worst = max(float(np.linalg.eigvalsh(G.hessian(x))[-1]) for x in samples)
        G.max_hessian_eig = worst
        if worst <= -margin:
            return G
    raise ReparamError("no eps in the schedule gives a negative definite Hessian on the samples")


@dataclass
class MultiplierFit:
    ok: bool
    h: Polynomial | None
    degree: int
    h_min: float
    hessian_max_eig: float
    worst_point: np.ndarray | None = None
    reason: str = ""


def verify_multiplier(g: Polynomial, h: Polynomial, X: np.ndarray, margin: float = HESSIAN_MARGIN) -> MultiplierFit:
    """Check ``h > 0`` and ``hess(g h) <= -margin`` at the rows of ``X``."""
    hv = h.eval_many(X)
    p = g * h
    eig = np.linalg.eigvalsh(polynomial_hessians(p, X))[:, -1]
    deg = 0 if h.is_zero() else int(h.degree)
    if hv.min() <= 0:
        k = int(np.argmin(hv))
        return MultiplierFit(False, h, deg, float(hv.min()), float(eig.max()), X[k], "h is not positive")
    if eig.max() > -margin:
        k = int(np.argmax(eig))
        return MultiplierFit(False, h, deg, float(hv.min()), float(eig.max()), X[k], "hess(g h) not negative definite")
    return MultiplierFit(True, h, deg, float(hv.min()), float(eig.max()))


def fit_positive_multiplier(
    g: Polynomial,
    G: Callable[[np.ndarray], np.ndarray],
    sampler: RegionSampler,
    degree: int,
    band: float = 1e-4,
    verify_points: np.ndarray | None = None,
) -> MultiplierFit:
    """Least-squares polynomial ``h ~ G / g`` on samples with ``|g| >= band``, then verify."""
    X = sampler.points
    gv = g.eval_many(X)
    fit = X[np.abs(gv) >= band]
    if fit.shape[0] == 0:
        return MultiplierFit(False, None, degree, np.nan, np.nan, reason="no samples outside the boundary band")
    w = G(fit) / g.eval_many(fit)
    basis = exponents_upto(g.nvars, degree)
    V = np.stack([np.prod(fit ** np.array(a), axis=1) for a in basis], axis=1)
    coef, *_ = np.linalg.lstsq(V, w, rcond=None)
    h = Polynomial({a: Fraction(float(c)) for a, c in zip(basis, coef)}, g.nvars)
    return verify_multiplier(g, h, X if verify_points is None else verify_points)
