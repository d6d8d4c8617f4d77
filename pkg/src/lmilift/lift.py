"""Lifted LMIs over moment variables ``y_alpha``, 0 <= |alpha| <= 2N.

Every PSD block is a localizing matrix ``sum_alpha A_alpha y_alpha`` where
``g(x) [x^k][x^k]^T = sum_alpha A_alpha x^alpha`` with exact rational
``A_alpha``. Lifts are lowered to :class:`ConicProblem` by eliminating pinned
moments (``y_0 = 1`` and, for membership, ``y_{e_i} = x_i``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Sequence

import numpy as np

from .polyalg import (
    Exponent,
    Polynomial,
    add_exp,
    all_01_vectors,
    exponents_upto,
    half_degree,
    monomial_basis,
    product_g_nu,
)
from .sdpcore import ConicProblem

KINDS = ("schmudgen", "putinar", "sosconcave", "refined-schmudgen", "refined-putinar")


class LiftError(ValueError):
    pass


@dataclass(frozen=True)
class MomentIndexMap:
    """Dense graded-lex indexing of ``y_alpha`` for ``|alpha| <= 2N``."""

    nvars: int
    order: int

    @cached_property
    def exponents(self) -> tuple[Exponent, ...]:
        return exponents_upto(self.nvars, 2 * self.order)

    @cached_property
    def _index(self) -> dict[Exponent, int]:
        return {a: i for i, a in enumerate(self.exponents)}

    def __len__(self):
        return math.comb(self.nvars + 2 * self.order, self.nvars)

    def index(self, alpha: Exponent) -> int:
        try:
            return self._index[tuple(alpha)]
        except KeyError:
            raise LiftError(f"moment {alpha} exceeds degree {2 * self.order}") from None

    def unit(self, i: int) -> Exponent:
        e = [0] * self.nvars
        e[i] = 1
        return tuple(e)

    def substitute(self, x) -> list:
        """Moment vector of the Dirac measure at ``x``: ``y_alpha = x^alpha``."""
        out = []
        for a in self.exponents:
            v = 1
            for xi, ai in zip(x, a):
                if ai:
                    v = v * xi**ai
            out.append(v)
        return out


@dataclass(frozen=True)
class CoeffMatrixFamily:
    """Sparse symmetric ``A_alpha`` with ``sum_alpha A_alpha y_alpha`` one PSD block."""

    label: str
    size: int
    # alpha -> {(i, j): value}, both triangles stored
    coeffs: dict

    def support(self) -> list[Exponent]:
        return list(self.coeffs)

    def matrix(self, alpha: Exponent) -> np.ndarray:
        M = np.zeros((self.size, self.size))
        for (i, j), v in self.coeffs.get(tuple(alpha), {}).items():
            M[i, j] = float(v)
        return M

    def exact_matrix(self, alpha: Exponent) -> list[list[Fraction]]:
        M = [[Fraction(0)] * self.size for _ in range(self.size)]
        for (i, j), v in self.coeffs.get(tuple(alpha), {}).items():
            M[i][j] = v
        return M

    def evaluate(self, y: dict | Sequence, index: MomentIndexMap | None = None):
        """``sum_alpha A_alpha y_alpha`` (exact if ``y`` is rational)."""
        M = [[0] * self.size for _ in range(self.size)]
        for alpha, entries in self.coeffs.items():
            val = y[alpha] if isinstance(y, dict) else y[index.index(alpha)]
            for (i, j), v in entries.items():
                M[i][j] = M[i][j] + v * val
        return M

    def reconstruct_at(self, x) -> list[list]:
        """``sum_alpha A_alpha x^alpha``."""
        y = {}
        for alpha in self.coeffs:
            v = 1
            for xi, ai in zip(x, alpha):
                if ai:
                    v = v * xi**ai
            y[alpha] = v
        return self.evaluate(y)


def _family(label: str, g: Polynomial, k: int) -> CoeffMatrixFamily:
    basis = monomial_basis(g.nvars, k).monomials
    coeffs: dict[Exponent, dict] = {}
    for i, bi in enumerate(basis):
        for j in range(i, len(basis)):
            bij = add_exp(bi, basis[j])
            for gamma, c in g.items():
                alpha = add_exp(bij, gamma)
                entries = coeffs.setdefault(alpha, {})
                entries[(i, j)] = entries.get((i, j), 0) + c
                if i != j:
                    entries[(j, i)] = entries[(i, j)]
    coeffs = {a: {ij: v for ij, v in e.items() if v != 0} for a, e in coeffs.items()}
    coeffs = {a: e for a, e in coeffs.items() if e}
    return CoeffMatrixFamily(label, len(basis), coeffs)


def moment_coeffs(n: int, N: int) -> CoeffMatrixFamily:
    """0/1 generalized Hankel matrices of ``[x^N][x^N]^T``."""
    if N < 0:
        raise LiftError("order must be nonnegative")
    return _family("moment", Polynomial.constant(1, n), N)


def localizing_coeffs(g: Polynomial, N: int, label: str | None = None) -> CoeffMatrixFamily:
    """Coefficients of ``g(x) [x^{N-d_g}][x^{N-d_g}]^T`` with ``d_g = ceil(deg g / 2)``."""
    d = half_degree(g)
    if N < d:
        raise LiftError(f"order {N} is below ceil(deg g / 2) = {d}")
    return _family(label or f"loc({g})", g, N - d)


@dataclass(frozen=True)
class ScalarRow:
    label: str
    # alpha -> coefficient; the row reads sum c_alpha y_alpha >= 0
    coeffs: dict

    @classmethod
    def from_polynomial(cls, label: str, p: Polynomial) -> ScalarRow:
        return cls(label, dict(p.items()))

    def evaluate(self, y: dict | Sequence, index: MomentIndexMap | None = None):
        total = 0
        for alpha, c in self.coeffs.items():
            total = total + c * (y[alpha] if isinstance(y, dict) else y[index.index(alpha)])
        return total


@dataclass(frozen=True)
class MomentLift:
    kind: str
    index: MomentIndexMap
    blocks: tuple[CoeffMatrixFamily, ...]
    scalar_rows: tuple[ScalarRow, ...] = ()
    pins: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise LiftError(f"unknown lift kind {self.kind!r}")
        top = 2 * self.index.order
        for b in self.blocks:
            for alpha in b.coeffs:
                if sum(alpha) > top:
                    raise LiftError(f"block {b.label} uses moment {alpha} beyond degree {top}")
        for r in self.scalar_rows:
            for alpha in r.coeffs:
                if sum(alpha) > top:
                    raise LiftError(f"row {r.label} uses moment {alpha} beyond degree {top}")

    @property
    def nvars(self) -> int:
        return self.index.nvars

    @property
    def order(self) -> int:
        return self.index.order

    def check_point(self, x, tol: float = 1e-9) -> tuple[float, float]:
        """Worst block eigenvalue and worst scalar row for the Dirac moments of ``x``."""
        y = self.index.substitute([float(v) for v in x])
        worst_eig = np.inf
        for b in self.blocks:
            M = np.array(b.evaluate(y, self.index), dtype=float)
            worst_eig = min(worst_eig, float(np.linalg.eigvalsh(M)[0]))
        worst_row = min((float(r.evaluate(y, self.index)) for r in self.scalar_rows), default=np.inf)
        return worst_eig, worst_row

    def to_dict(self) -> dict:
        """JSON-ready dump with deterministic ordering."""

        def alpha_list(a):
            return list(a)

        def num(v):
            return str(v) if isinstance(v, Fraction) else float(v)

        blocks = []
        for b in self.blocks:
            entries = []
            for alpha in sorted(b.coeffs, key=self.index.index):
                for (i, j), v in sorted(b.coeffs[alpha].items()):
                    if i <= j:
                        entries.append({"alpha": alpha_list(alpha), "i": i, "j": j, "value": num(v)})
            blocks.append({"label": b.label, "size": b.size, "entries": entries})
        rows = [
            {
                "label": r.label,
                "coeffs": [
                    {"alpha": alpha_list(a), "value": num(r.coeffs[a])}
                    for a in sorted(r.coeffs, key=self.index.index)
                ],
            }
            for r in self.scalar_rows
        ]
        pins = [{"alpha": alpha_list(a), "value": num(v)} for a, v in sorted(self.pins.items(), key=lambda kv: self.index.index(kv[0]))]
        return {
            "kind": self.kind,
            "n": self.nvars,
            "N": self.order,
            "blocks": blocks,
            "scalar_rows": rows,
            "pins": pins,
        }


def _zero(n):
    return (0,) * n


def min_order(gs: Sequence[Polynomial], kind: str = "schmudgen", ps: Sequence[Polynomial] = ()) -> int:
    """Smallest admissible relaxation order for a lift kind."""
    if kind in ("schmudgen", "refined-schmudgen"):
        base = half_degree(product_g_nu(gs, [1] * len(gs))) if gs else 0
    elif kind in ("putinar", "refined-putinar"):
        base = max((half_degree(g) for g in gs), default=0)
    else:
        base = max((half_degree(g) for g in gs), default=0)
    for p in ps:
        base = max(base, half_degree(p))
    return max(base, 1)


def _check_gs(gs):
    if not gs:
        raise LiftError("need at least one constraint")
    n = gs[0].nvars
    if any(g.nvars != n for g in gs):
        raise LiftError("constraints live in different rings")
    return n


def _nu_label(nu):
    return "nu=" + "".join(str(v) for v in nu)


def build_schmudgen(gs: Sequence[Polynomial], N: int, kind: str = "schmudgen") -> MomentLift:
    n = _check_gs(gs)
    need = min_order(gs, "schmudgen")
    if N < need:
        raise LiftError(f"Schmudgen lift needs N >= {need}, got {N}")
    blocks = []
    for nu in all_01_vectors(len(gs)):
        g_nu = product_g_nu(gs, nu)
        blocks.append(localizing_coeffs(g_nu, N, _nu_label(nu)))
    return MomentLift(kind, MomentIndexMap(n, N), tuple(blocks), (), {_zero(n): Fraction(1)})


def build_putinar(gs: Sequence[Polynomial], N: int, kind: str = "putinar") -> MomentLift:
    n = _check_gs(gs)
    need = min_order(gs, "putinar")
    if N < need:
        raise LiftError(f"Putinar lift needs N >= {need}, got {N}")
    m = len(gs)
    blocks = [localizing_coeffs(Polynomial.constant(1, n), N, _nu_label([0] * m))]
    for k, g in enumerate(gs):
        nu = [0] * m
        nu[k] = 1
        blocks.append(localizing_coeffs(g, N, _nu_label(nu)))
    return MomentLift(kind, MomentIndexMap(n, N), tuple(blocks), (), {_zero(n): Fraction(1)})


def add_ball(gs: Sequence[Polynomial], R) -> list[Polynomial]:
    """Append the redundant ball constraint ``R - |x|^2 >= 0``."""
    if R <= 0:
        raise LiftError("ball radius squared must be positive")
    n = gs[0].nvars
    ball = Polynomial.constant(Fraction(R) if not isinstance(R, float) else R, n)
    for i in range(n):
        ball = ball - Polynomial.variable(i, n) ** 2
    return list(gs) + [ball]


def build_sosconcave(gs: Sequence[Polynomial]) -> MomentLift:
    """Moment matrix of order ``d_g = max ceil(deg g_i / 2)`` plus rows ``L_{g_i}(y) >= 0``."""
    n = _check_gs(gs)
    dg = max(1, max(half_degree(g) for g in gs))
    block = moment_coeffs(n, dg)
    rows = tuple(ScalarRow.from_polynomial(f"L(g{i + 1})", g) for i, g in enumerate(gs))
    return MomentLift("sosconcave", MomentIndexMap(n, dg), (block,), rows, {_zero(n): Fraction(1)})


def build_refined(
    ps: Sequence[Polynomial], gs: Sequence[Polynomial], N: int, variant: str = "schmudgen"
) -> MomentLift:
    """Blocks from ``gs`` (Schmudgen or Putinar) plus scalar rows ``L_{p_i}(y) >= 0``."""
    for p in ps:
        if p.degree > 2 * N:
            raise LiftError(f"deg p = {p.degree} exceeds 2N = {2 * N}")
    if variant == "schmudgen":
        base = build_schmudgen(gs, N, kind="refined-schmudgen")
    elif variant == "putinar":
        base = build_putinar(gs, N, kind="refined-putinar")
    else:
        raise LiftError(f"unknown variant {variant!r}")
    rows = tuple(ScalarRow.from_polynomial(f"L(p{i + 1})", p) for i, p in enumerate(ps))
    return MomentLift(base.kind, base.index, base.blocks, rows, dict(base.pins))


def build_lift(kind: str, gs, N: int | None = None, ps=()) -> MomentLift:
    """Dispatch by kind name with automatic minimum order."""
    if kind == "sosconcave":
        return build_sosconcave(gs)
    if N is None:
        N = min_order(gs, kind, ps)
    if kind == "schmudgen":
        return build_schmudgen(gs, N)
    if kind == "putinar":
        return build_putinar(gs, N)
    if kind == "refined-schmudgen":
        return build_refined(ps or gs, gs, N, "schmudgen")
    if kind == "refined-putinar":
        return build_refined(ps or gs, gs, N, "putinar")
    raise LiftError(f"unknown lift kind {kind!r}")


# ---------------------------------------------------------------------------
# lowering


def lower(lift: MomentLift, pins: dict | None = None, cost: dict | None = None, tag: str = "") -> tuple[ConicProblem, list[Exponent]]:
    """Eliminate pinned moments and return the conic problem plus its free moments."""
    pins = dict(lift.pins) | dict(pins or {})
    cost = cost or {}
    free = [a for a in lift.index.exponents if a not in pins]
    col = {a: j + 1 for j, a in enumerate(free)}
    mats = []
    for fam in lift.blocks:
        B = np.zeros((len(free) + 1, fam.size, fam.size))
        for alpha, entries in fam.coeffs.items():
            for (i, j), v in entries.items():
                if alpha in pins:
                    B[0, i, j] += float(v) * float(pins[alpha])
                else:
                    B[col[alpha], i, j] += float(v)
        mats.append(B)
    for row in lift.scalar_rows:
        B = np.zeros((len(free) + 1, 1, 1))
        for alpha, v in row.coeffs.items():
            if alpha in pins:
                B[0, 0, 0] += float(v) * float(pins[alpha])
            else:
                B[col[alpha], 0, 0] += float(v)
        mats.append(B)
    c = np.zeros(len(free))
    for alpha, v in cost.items():
        if alpha in pins:
            continue
        c[col[alpha] - 1] += float(v)
    return ConicProblem(len(free), c, mats, tag or lift.kind), free


def membership_problem(lift: MomentLift, point) -> ConicProblem:
    """Feasibility SDP with ``y_{e_i}`` pinned to the coordinates of ``point``."""
    if len(point) != lift.nvars:
        raise LiftError(f"point has {len(point)} coordinates, lift has {lift.nvars}")
    pins = {lift.index.unit(i): float(v) for i, v in enumerate(point)}
    prob, _ = lower(lift, pins=pins, tag=f"{lift.kind}:member")
    return prob


def linmin_problem(lift: MomentLift, ell) -> ConicProblem:
    """``min sum ell_i y_{e_i}`` over the lift; a lower bound on ``min_{x in S} ell^T x``."""
    ell = [float(v) for v in ell]
    if len(ell) != lift.nvars:
        raise LiftError("direction has the wrong dimension")
    if abs(math.fsum(v * v for v in ell) - 1.0) > 1e-12:
        raise LiftError("direction must have unit length")
    cost = {lift.index.unit(i): v for i, v in enumerate(ell)}
    prob, _ = lower(lift, cost=cost, tag=f"{lift.kind}:linmin")
    return prob


def first_moments(lift: MomentLift, y_free, free: list[Exponent] | None = None) -> np.ndarray:
    """Recover ``(y_{e_1}, ..., y_{e_n})`` from a solution of :func:`linmin_problem`."""
    if free is None:
        free = [a for a in lift.index.exponents if a not in lift.pins]
    pos = {a: j for j, a in enumerate(free)}
    return np.array([y_free[pos[lift.index.unit(i)]] for i in range(lift.nvars)])


# ---------------------------------------------------------------------------
# hand-coded lift of the quartic set T = {x : 1 - x1^4 - x2^4 >= 0}


def quartic_lift_problem(point) -> ConicProblem:
    """Feasibility SDP in ``w = (w1, w2)`` for the explicit lift of T at ``point``.

    ``[[1, x_i], [x_i, w_i]] >= 0`` gives ``w_i >= x_i^2`` and
    ``[[1 + w1, w2], [w2, 1 - w1]] >= 0`` gives ``w1^2 + w2^2 <= 1``.
    """
    x1, x2 = (float(v) for v in point)
    disk = np.zeros((3, 2, 2))
    disk[0] = np.eye(2)
    disk[1] = [[1.0, 0.0], [0.0, -1.0]]
    disk[2] = [[0.0, 1.0], [1.0, 0.0]]
    blocks = [disk]
    for i, xi in enumerate((x1, x2)):
        B = np.zeros((3, 2, 2))
        B[0] = [[1.0, xi], [xi, 0.0]]
        B[1 + i, 1, 1] = 1.0
        blocks.append(B)
    return ConicProblem(2, np.zeros(2), blocks, "quartic:member")
