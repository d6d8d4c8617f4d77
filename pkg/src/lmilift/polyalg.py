"""Sparse multivariate polynomials over exact rationals (or floats).

Monomials are exponent tuples. The global order is graded lexicographic with
``x1 > x2 > ... > xn``, so the monomial vector of degree 2 in two variables is
``1, x1, x2, x1^2, x1*x2, x2^2``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import product
from numbers import Number, Rational
from typing import Iterable, Mapping, Sequence

import numpy as np

Exponent = tuple[int, ...]

# degree of the zero polynomial
NEG_INF = -math.inf


def _coerce(c):
    if isinstance(c, Fraction):
        return c
    if isinstance(c, (bool, np.bool_)):
        return Fraction(int(c))
    if isinstance(c, (int, np.integer)):
        return Fraction(int(c))
    if isinstance(c, Rational):
        return Fraction(c.numerator, c.denominator)
    if isinstance(c, (float, np.floating)):
        return float(c)
    raise TypeError(f"unsupported coefficient type {type(c).__name__}")


def grlex_key(alpha: Exponent):
    """Sort key placing monomials in graded-lex order (x1 ranked highest)."""
    return (sum(alpha), tuple(-a for a in alpha))


@lru_cache(maxsize=None)
def _exponents_of_degree(n: int, d: int) -> tuple[Exponent, ...]:
    # lex-descending compositions of d into n parts
    if n == 1:
        return ((d,),)
    out = []
    for first in range(d, -1, -1):
        for rest in _exponents_of_degree(n - 1, d - first):
            out.append((first,) + rest)
    return tuple(out)


def exponents_upto(n: int, N: int) -> tuple[Exponent, ...]:
    out: list[Exponent] = []
    for d in range(N + 1):
        out.extend(_exponents_of_degree(n, d))
    return tuple(out)


def add_exp(a: Exponent, b: Exponent) -> Exponent:
    return tuple(x + y for x, y in zip(a, b))


@dataclass(frozen=True)
class MonomialBasis:
    """The ordered monomial vector ``[x^N]`` of all monomials of degree <= N."""

    nvars: int
    degree: int

    def __post_init__(self):
        if self.nvars < 1 or self.degree < 0:
            raise ValueError("need nvars >= 1 and degree >= 0")

    @property
    def monomials(self) -> tuple[Exponent, ...]:
        return exponents_upto(self.nvars, self.degree)

    def __len__(self) -> int:
        return math.comb(self.nvars + self.degree, self.nvars)

    def __iter__(self):
        return iter(self.monomials)

    def __getitem__(self, i):
        return self.monomials[i]

    def index(self, alpha: Exponent) -> int:
        return _index_map(self.nvars, self.degree)[tuple(alpha)]

    def evaluate(self, x) -> list:
        return [_monomial_value(a, x) for a in self.monomials]


@lru_cache(maxsize=None)
def _index_map(n: int, N: int) -> dict[Exponent, int]:
    return {a: i for i, a in enumerate(exponents_upto(n, N))}


def monomial_basis(n: int, N: int) -> MonomialBasis:
    return MonomialBasis(n, N)


def _monomial_value(alpha: Exponent, x):
    v = 1
    for xi, a in zip(x, alpha):
        if a:
            v = v * xi**a
    return v


class Polynomial:
    """Immutable sparse polynomial ``sum c_alpha x^alpha`` in ``nvars`` variables."""

    __slots__ = ("_terms", "nvars", "_hash")

    def __init__(self, terms: Mapping[Exponent, object] | None = None, nvars: int = 1):
        self.nvars = int(nvars)
        clean: dict[Exponent, object] = {}
        for alpha, c in (terms or {}).items():
            alpha = tuple(int(a) for a in alpha)
            if len(alpha) != self.nvars:
                raise ValueError(f"exponent {alpha} does not have {self.nvars} entries")
            if any(a < 0 for a in alpha):
                raise ValueError(f"negative exponent in {alpha}")
            c = _coerce(c)
            if c == 0:
                continue
            if alpha in clean:
                c = clean[alpha] + c
                if c == 0:
                    del clean[alpha]
                    continue
            clean[alpha] = c
        self._terms = dict(sorted(clean.items(), key=lambda kv: grlex_key(kv[0])))
        self._hash = None

    # construction helpers
    @classmethod
    def zero(cls, nvars: int) -> Polynomial:
        return cls({}, nvars)

    @classmethod
    def constant(cls, c, nvars: int) -> Polynomial:
        return cls({(0,) * nvars: c}, nvars)

    @classmethod
    def variable(cls, i: int, nvars: int) -> Polynomial:
        """The coordinate polynomial x_{i+1} (0-based ``i``)."""
        alpha = [0] * nvars
        alpha[i] = 1
        return cls({tuple(alpha): 1}, nvars)

    @classmethod
    def monomial(cls, alpha: Exponent, coeff=1) -> Polynomial:
        return cls({tuple(alpha): coeff}, len(alpha))

    @classmethod
    def parse(cls, text: str, nvars: int | None = None) -> Polynomial:
        return parse_polynomial(text, nvars)

    # basic accessors
    @property
    def terms(self) -> dict[Exponent, object]:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def coeff(self, alpha: Exponent):
        return self._terms.get(tuple(alpha), 0)

    @property
    def degree(self):
        if not self._terms:
            return NEG_INF
        return max(sum(a) for a in self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def is_exact(self) -> bool:
        return all(isinstance(c, Fraction) for c in self._terms.values())

    def __len__(self):
        return len(self._terms)

    def __eq__(self, other):
        if isinstance(other, Number):
            other = Polynomial.constant(other, self.nvars)
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.nvars == other.nvars and self._terms == other._terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.nvars, tuple(self._terms.items())))
        return self._hash

    # arithmetic
    def _lift(self, other) -> Polynomial:
        if isinstance(other, Polynomial):
            if other.nvars != self.nvars:
                raise ValueError(f"nvars mismatch: {self.nvars} vs {other.nvars}")
            return other
        return Polynomial.constant(other, self.nvars)

    def __add__(self, other):
        other = self._lift(other)
        terms = dict(self._terms)
        for a, c in other._terms.items():
            terms[a] = terms.get(a, 0) + c
        return Polynomial(terms, self.nvars)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial({a: -c for a, c in self._terms.items()}, self.nvars)

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        if not isinstance(other, Polynomial):
            c = _coerce(other)
            return Polynomial({a: c * v for a, v in self._terms.items()}, self.nvars)
        other = self._lift(other)
        terms: dict[Exponent, object] = {}
        for a, ca in self._terms.items():
            for b, cb in other._terms.items():
                k = add_exp(a, b)
                terms[k] = terms.get(k, 0) + ca * cb
        return Polynomial(terms, self.nvars)

    __rmul__ = __mul__

    def __truediv__(self, other):
        c = _coerce(other)
        if isinstance(c, Fraction):
            return self * (1 / c)
        return self * (1.0 / c)

    def __pow__(self, k: int):
        if k < 0:
            raise ValueError("negative power")
        result = Polynomial.constant(1, self.nvars)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    # evaluation and calculus
    def __call__(self, x):
        return self.eval(x)

    def eval(self, x):
        """Evaluate at a point; exact when ``x`` and the coefficients are rational."""
        x = list(x)
        if len(x) != self.nvars:
            raise ValueError(f"point has {len(x)} coordinates, polynomial has {self.nvars} variables")
        if all(isinstance(v, (int, Fraction)) for v in x):
            x = [Fraction(v) for v in x]
        total = 0
        for alpha, c in self._terms.items():
            total = total + c * _monomial_value(alpha, x)
        return total

    def eval_many(self, X) -> np.ndarray:
        """Vectorized float evaluation at the rows of ``X`` (shape ``(k, n)``)."""
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.nvars:
            raise ValueError("dimension mismatch")
        out = np.zeros(X.shape[0])
        if not self._terms:
            return out
        maxdeg = max(max(a) for a in self._terms)
        powers = [np.ones_like(X)]
        for _ in range(maxdeg):
            powers.append(powers[-1] * X)
        for alpha, c in self._terms.items():
            term = np.full(X.shape[0], float(c))
            for i, a in enumerate(alpha):
                if a:
                    term = term * powers[a][:, i]
            out += term
        return out

    def diff(self, i: int) -> Polynomial:
        terms = {}
        for alpha, c in self._terms.items():
            if alpha[i]:
                beta = list(alpha)
                beta[i] -= 1
                terms[tuple(beta)] = c * alpha[i]
        return Polynomial(terms, self.nvars)

    def to_float(self) -> Polynomial:
        return Polynomial({a: float(c) for a, c in self._terms.items()}, self.nvars)

    def compose(self, subs: Sequence[Polynomial]) -> Polynomial:
        """Substitute ``x_i -> subs[i]`` (all ``subs`` share one variable count)."""
        if len(subs) != self.nvars:
            raise ValueError("need one substitution per variable")
        m = subs[0].nvars
        result = Polynomial.zero(m)
        cache: dict[tuple[int, int], Polynomial] = {}

        def power(i, k):
            if (i, k) not in cache:
                cache[(i, k)] = subs[i] ** k
            return cache[(i, k)]

        for alpha, c in self._terms.items():
            term = Polynomial.constant(c, m)
            for i, a in enumerate(alpha):
                if a:
                    term = term * power(i, a)
            result = result + term
        return result

    def extend(self, nvars: int) -> Polynomial:
        """Embed into a ring with more variables appended at the end."""
        pad = (0,) * (nvars - self.nvars)
        return Polynomial({a + pad: c for a, c in self._terms.items()}, nvars)

    def max_abs_coeff(self) -> float:
        return max((abs(float(c)) for c in self._terms.values()), default=0.0)

    def __repr__(self):
        return f"Polynomial({format_polynomial(self)!r}, nvars={self.nvars})"

    def __str__(self):
        return format_polynomial(self)


@dataclass(frozen=True)
class MatrixPolynomial:
    """Symmetric r x r matrix whose entries are polynomials."""

    entries: tuple[tuple[Polynomial, ...], ...]

    def __post_init__(self):
        r = len(self.entries)
        for i in range(r):
            if len(self.entries[i]) != r:
                raise ValueError("matrix polynomial must be square")
            for j in range(i):
                if self.entries[i][j] != self.entries[j][i]:
                    raise ValueError(f"entry ({i},{j}) differs from ({j},{i})")

    @classmethod
    def from_rows(cls, rows) -> MatrixPolynomial:
        """Build from nested rows; scalar entries become constants."""
        rows = [list(r) for r in rows]
        n = next((e.nvars for r in rows for e in r if isinstance(e, Polynomial)), 1)
        conv = lambda e: e if isinstance(e, Polynomial) else Polynomial.constant(e, n)
        return cls(tuple(tuple(conv(e) for e in r) for r in rows))

    @classmethod
    def zeros(cls, r: int, nvars: int) -> MatrixPolynomial:
        z = Polynomial.zero(nvars)
        return cls(tuple(tuple(z for _ in range(r)) for _ in range(r)))

    @classmethod
    def identity(cls, r: int, nvars: int) -> MatrixPolynomial:
        rows = [[Polynomial.constant(1 if i == j else 0, nvars) for j in range(r)] for i in range(r)]
        return cls.from_rows(rows)

    @property
    def dim(self) -> int:
        return len(self.entries)

    @property
    def nvars(self) -> int:
        return self.entries[0][0].nvars

    def __getitem__(self, ij):
        i, j = ij
        return self.entries[i][j]

    @property
    def degree(self):
        return max((e.degree for row in self.entries for e in row), default=NEG_INF)

    def map(self, fn) -> MatrixPolynomial:
        return MatrixPolynomial.from_rows([[fn(e) for e in row] for row in self.entries])

    def __add__(self, other: MatrixPolynomial) -> MatrixPolynomial:
        return MatrixPolynomial.from_rows(
            [[a + b for a, b in zip(ra, rb)] for ra, rb in zip(self.entries, other.entries)]
        )

    def __sub__(self, other: MatrixPolynomial) -> MatrixPolynomial:
        return self + (-other)

    def __neg__(self):
        return self.map(lambda e: -e)

    def __mul__(self, c) -> MatrixPolynomial:
        return self.map(lambda e: e * c)

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, MatrixPolynomial):
            return NotImplemented
        return self.entries == other.entries

    def __hash__(self):
        return hash(self.entries)

    def eval(self, x) -> np.ndarray:
        return np.array([[float(e.eval(x)) for e in row] for row in self.entries])

    def eval_exact(self, x) -> list[list]:
        return [[e.eval(x) for e in row] for row in self.entries]

    def eval_many(self, X) -> np.ndarray:
        """Evaluate at rows of ``X``; returns shape ``(k, r, r)``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        r = self.dim
        out = np.empty((X.shape[0], r, r))
        for i in range(r):
            for j in range(i, r):
                v = self.entries[i][j].eval_many(X)
                out[:, i, j] = v
                out[:, j, i] = v
        return out

    def coefficient_matrices(self) -> dict[Exponent, np.ndarray]:
        """Map each exponent to the float coefficient matrix ``F_alpha``."""
        r = self.dim
        out: dict[Exponent, np.ndarray] = {}
        for i in range(r):
            for j in range(r):
                for alpha, c in self.entries[i][j].items():
                    out.setdefault(alpha, np.zeros((r, r)))[i, j] = float(c)
        return dict(sorted(out.items(), key=lambda kv: grlex_key(kv[0])))

    def quadratic_form(self, v: Sequence[Polynomial]) -> Polynomial:
        """``v^T P v`` for a vector of polynomials ``v``."""
        total = Polynomial.zero(v[0].nvars)
        for i in range(self.dim):
            for j in range(self.dim):
                if not self.entries[i][j].is_zero():
                    total = total + v[i] * self.entries[i][j] * v[j]
        return total


def gradient(p: Polynomial) -> tuple[Polynomial, ...]:
    return tuple(p.diff(i) for i in range(p.nvars))


def hessian(p: Polynomial) -> MatrixPolynomial:
    grad = gradient(p)
    n = p.nvars
    rows = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(i, n):
            rows[i][j] = rows[j][i] = grad[i].diff(j)
    return MatrixPolynomial.from_rows(rows)


def _factorial_weight(alpha: Exponent) -> Fraction:
    num = 1
    for a in alpha:
        num *= math.factorial(a)
    return Fraction(num, math.factorial(sum(alpha)))


def poly_norm(p: Polynomial):
    """``max_alpha |f_alpha| * alpha! / |alpha|!`` (exact for rational input)."""
    best = 0
    for alpha, c in p.items():
        w = _factorial_weight(alpha)
        val = abs(c) * (w if isinstance(c, Fraction) else float(w))
        if val > best:
            best = val
    return best


def matpoly_norm(F: MatrixPolynomial) -> float:
    """Largest spectral norm of a coefficient matrix, weighted as in ``poly_norm``."""
    best = 0.0
    for alpha, mat in F.coefficient_matrices().items():
        spec = float(np.max(np.abs(np.linalg.eigvalsh(mat)))) if mat.size else 0.0
        best = max(best, spec * float(_factorial_weight(alpha)))
    return best


def product_g_nu(gs: Sequence[Polynomial], nu: Sequence[int]) -> Polynomial:
    """``g_1^{nu_1} ... g_m^{nu_m}`` for a 0/1 vector ``nu``."""
    if len(gs) != len(nu):
        raise ValueError("nu must have one entry per constraint")
    if any(v not in (0, 1) for v in nu):
        raise ValueError("nu must be a 0/1 vector")
    n = gs[0].nvars
    out = Polynomial.constant(1, n)
    for g, v in zip(gs, nu):
        if v:
            out = out * g
    return out


def half_degree(p: Polynomial) -> int:
    """``ceil(deg p / 2)``, with 0 for constants (including the zero polynomial)."""
    d = p.degree
    if d == NEG_INF:
        return 0
    return (int(d) + 1) // 2


def substitute_line(P: MatrixPolynomial, u: Sequence) -> dict[int, MatrixPolynomial]:
    """Expand ``P(u + s(x - u))`` in powers of ``s``.

    Returns ``{k: P_k}`` with ``P(u + s(x-u)) = sum_k s^k P_k(x)``; empty slices
    are omitted.
    """
    n = P.nvars
    if len(u) != n:
        raise ValueError("u has the wrong dimension")
    u = [_coerce(v) for v in u]
    # ring (x_1..x_n, s)
    s = Polynomial.variable(n, n + 1)
    subs = [
        Polynomial.constant(u[i], n + 1) + s * (Polynomial.variable(i, n + 1) - u[i])
        for i in range(n)
    ]
    r = P.dim
    expanded = [[None] * r for _ in range(r)]
    for i in range(r):
        for j in range(i, r):
            expanded[i][j] = expanded[j][i] = P[i, j].compose(subs)
    degrees = sorted({a[n] for row in expanded for e in row for a, _ in e.items()})
    slices: dict[int, MatrixPolynomial] = {}
    for k in degrees:
        rows = [
            [
                Polynomial({a[:n]: c for a, c in expanded[i][j].items() if a[n] == k}, n)
                for j in range(r)
            ]
            for i in range(r)
        ]
        slices[k] = MatrixPolynomial.from_rows(rows)
    return slices


# ---------------------------------------------------------------------------
# text format

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d*)?(?:[eE][-+]?\d+)?(?:/\d+)?|\.\d+(?:[eE][-+]?\d+)?)"
    r"|(?P<var>x(?P<idx>\d+))|(?P<op>[-+*^()]))"
)


class PolynomialSyntaxError(ValueError):
    def __init__(self, msg: str, pos: int):
        super().__init__(f"{msg} at column {pos + 1}")
        self.pos = pos


def _tokenize(text: str):
    pos = 0
    tokens = []
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            bad = pos + len(text[pos:]) - len(text[pos:].lstrip())
            raise PolynomialSyntaxError(f"unexpected character {text[bad]!r}", bad)
        start = m.start(m.lastgroup) if m.lastgroup else pos
        if m.group("num") is not None:
            tokens.append(("num", m.group("num"), start))
        elif m.group("var") is not None:
            tokens.append(("var", int(m.group("idx")), start))
        else:
            tokens.append(("op", m.group("op"), start))
        pos = m.end()
    tokens.append(("end", None, len(text)))
    return tokens


def parse_polynomial(text: str, nvars: int | None = None) -> Polynomial:
    """Parse e.g. ``"1 - x1^4 - x2^4"`` or ``"3/2*x1*x2 + 0.5"``.

    Decimal literals are read exactly (``0.1`` is ``1/10``). Parentheses and
    integer powers of subexpressions are accepted as a convenience.
    """
    tokens = _tokenize(text)
    used = [t[1] for t in tokens if t[0] == "var"]
    if any(i < 1 for i in used):
        bad = next(t for t in tokens if t[0] == "var" and t[1] < 1)
        raise PolynomialSyntaxError("variables are numbered from x1", bad[2])
    n = nvars if nvars is not None else max(used, default=1)
    if used and max(used) > n:
        bad = next(t for t in tokens if t[0] == "var" and t[1] > n)
        raise PolynomialSyntaxError(f"x{bad[1]} exceeds nvars={n}", bad[2])
    pos = 0

    def peek():
        return tokens[pos]

    def take(kind=None, value=None):
        nonlocal pos
        tok = tokens[pos]
        if (kind and tok[0] != kind) or (value and tok[1] != value):
            raise PolynomialSyntaxError(f"expected {value or kind}", tok[2])
        pos += 1
        return tok

    def expr():
        sign = 1
        if peek()[0] == "op" and peek()[1] in "+-":
            sign = -1 if take()[1] == "-" else 1
        acc = term() * sign
        while peek()[0] == "op" and peek()[1] in "+-":
            op = take()[1]
            rhs = term()
            acc = acc + rhs if op == "+" else acc - rhs
        return acc

    def term():
        acc = power()
        while peek()[0] == "op" and peek()[1] == "*":
            take()
            acc = acc * power()
        return acc

    def power():
        base = atom()
        if peek()[0] == "op" and peek()[1] == "^":
            take()
            tok = take("num")
            if not re.fullmatch(r"\d+", tok[1]):
                raise PolynomialSyntaxError("exponent must be a nonnegative integer", tok[2])
            base = base ** int(tok[1])
        return base

    def atom():
        tok = peek()
        if tok[0] == "num":
            take()
            return Polynomial.constant(Fraction(tok[1]), n)
        if tok[0] == "var":
            take()
            return Polynomial.variable(tok[1] - 1, n)
        if tok[0] == "op" and tok[1] == "(":
            take()
            inner = expr()
            take("op", ")")
            return inner
        if tok[0] == "op" and tok[1] == "-":
            take()
            return -atom()
        raise PolynomialSyntaxError("expected a number, variable or '('", tok[2])

    result = expr()
    if peek()[0] != "end":
        raise PolynomialSyntaxError("trailing input", peek()[2])
    return result


def _format_coeff(c) -> str:
    if isinstance(c, Fraction):
        return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"
    return repr(float(c))


def format_polynomial(p: Polynomial) -> str:
    """Canonical text form, terms in graded-lex order, parseable by ``parse_polynomial``."""
    if p.is_zero():
        return "0"
    parts = []
    for alpha, c in p.items():
        neg = c < 0
        mag = -c if neg else c
        factors = [f"x{i + 1}" + (f"^{a}" if a > 1 else "") for i, a in enumerate(alpha) if a]
        if mag != 1 or not factors:
            factors.insert(0, _format_coeff(mag))
        body = " * ".join(factors)
        if not parts:
            parts.append(("-" if neg else "") + body)
        else:
            parts.append(("- " if neg else "+ ") + body)
    return " ".join(parts)


def polynomials_from_text(texts: Iterable[str], nvars: int) -> list[Polynomial]:
    return [parse_polynomial(t, nvars) for t in texts]


def rationalize(values, limit: int | None = None) -> list[Fraction]:
    """Exact rationals for a float vector (``limit`` bounds the denominator)."""
    out = []
    for v in values:
        f = Fraction(v) if not isinstance(v, Fraction) else v
        if limit is not None:
            f = f.limit_denominator(limit)
        out.append(f)
    return out


def all_01_vectors(m: int) -> list[tuple[int, ...]]:
    """``{0,1}^m`` in binary counting order (first entry varies slowest)."""
    return [tuple(v) for v in product((0, 1), repeat=m)]
