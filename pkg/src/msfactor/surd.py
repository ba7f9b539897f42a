"""Exact arithmetic in multi-quadratic fields ``Q(sqrt(d1), ..., sqrt(dk))``.

An element is a finite sum ``sum_r c_r sqrt(r)`` over distinct square-free
radicands ``r >= 1`` with rational ``c_r``. These products of square roots
of primes form a basis, so the representation is canonical and equality
is exact. Fields merge automatically: the field of an element is the set
of primes dividing its radicands.

The text format used by corpus files writes ``s7`` for ``sqrt(7)``, e.g.
``"(1+s7)/8"`` or ``"-3/4*s2 + s6"``.
"""
from fractions import Fraction
from functools import lru_cache, reduce
from math import gcd
import math
import re

import mpmath
import numpy as np
from sympy import factorint, primefactors

from .errors import (
    DimensionMismatch,
    NoRealFactorization,
    NotPositive,
    NotRepresentable,
)

_MAX_SQRT_DEPTH = 12


@lru_cache(maxsize=4096)
def _squarefree_split(n):
    """``n = s**2 * r`` with ``r`` square-free; returns ``(s, r)``."""
    if n <= 0:
        raise ValueError("expected a positive integer")
    root = math.isqrt(n)
    if root * root == n:
        return root, 1
    s, r = 1, 1
    for p, e in factorint(n).items():
        s *= p ** (e // 2)
        if e % 2:
            r *= p
    return s, r


@lru_cache(maxsize=4096)
def _primes_of(r):
    return sorted(primefactors(r))


def _as_fraction(v):
    if isinstance(v, Fraction):
        return v
    if isinstance(v, (int, np.integer)):
        return Fraction(int(v))
    if isinstance(v, str):
        return Fraction(v)
    raise TypeError(f"cannot convert {type(v).__name__} to an exact rational")


class SurdElem:
    """Immutable element of a multi-quadratic field.

    Parameters
    ----------
    coeffs : mapping int -> Fraction or int
        Coefficient of ``sqrt(r)`` for each square-free radicand ``r``;
        ``r = 1`` is the rational part.
    """

    __slots__ = ("_c", "_hash")

    def __init__(self, coeffs=None):
        c = {}
        for r, v in (coeffs or {}).items():
            r = int(r)
            if r < 1:
                raise ValueError(f"radicand must be positive, got {r}")
            v = _as_fraction(v)
            if v == 0:
                continue
            s, rr = _squarefree_split(r)
            c[rr] = c.get(rr, Fraction(0)) + v * s
            if c[rr] == 0:
                del c[rr]
        self._c = c
        self._hash = None

    # constructors
    @classmethod
    def rational(cls, q):
        return cls({1: _as_fraction(q)})

    @classmethod
    def sqrt_int(cls, n):
        """``sqrt(n)`` for a non-negative integer ``n``."""
        if n < 0:
            raise NotRepresentable(f"sqrt({n}) is not real")
        return cls({n: 1}) if n else cls()

    @classmethod
    def coerce(cls, v):
        if isinstance(v, SurdElem):
            return v
        if isinstance(v, str):
            return parse(v)
        return cls.rational(v)

    # structure
    @property
    def coeffs(self):
        return dict(self._c)

    @property
    def primes(self):
        """Primes whose square roots occur in this element."""
        ps = set()
        for r in self._c:
            ps.update(_primes_of(r))
        return sorted(ps)

    @property
    def field(self):
        return tuple(self.primes)

    def is_zero(self):
        return not self._c

    def is_rational(self):
        return all(r == 1 for r in self._c)

    def rational_part(self):
        return self._c.get(1, Fraction(0))

    def conjugate(self, p):
        """Image under ``sqrt(p) -> -sqrt(p)`` for the prime ``p``."""
        return SurdElem({r: (-c if r % p == 0 else c) for r, c in self._c.items()})

    def split(self, p):
        """``(x, y)`` with ``self = x + y sqrt(p)`` and ``x, y`` free of ``p``."""
        x, y = {}, {}
        for r, c in self._c.items():
            if r % p == 0:
                y[r // p] = c
            else:
                x[r] = c
        return SurdElem(x), SurdElem(y)

    # arithmetic
    def __add__(self, other):
        other = _coerce_or_none(other)
        if other is None:
            return NotImplemented
        c = dict(self._c)
        for r, v in other._c.items():
            c[r] = c.get(r, Fraction(0)) + v
        return SurdElem(c)

    __radd__ = __add__

    def __neg__(self):
        return SurdElem({r: -c for r, c in self._c.items()})

    def __pos__(self):
        return self

    def __sub__(self, other):
        other = _coerce_or_none(other)
        if other is None:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        other = _coerce_or_none(other)
        if other is None:
            return NotImplemented
        return other + (-self)

    def __mul__(self, other):
        other = _coerce_or_none(other)
        if other is None:
            return NotImplemented
        c = {}
        for ra, va in self._c.items():
            for rb, vb in other._c.items():
                g = gcd(ra, rb)
                r = (ra // g) * (rb // g)
                c[r] = c.get(r, Fraction(0)) + va * vb * g
        return SurdElem(c)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _coerce_or_none(other)
        if other is None:
            return NotImplemented
        return self * other.inv()

    def __rtruediv__(self, other):
        other = _coerce_or_none(other)
        if other is None:
            return NotImplemented
        return other * self.inv()

    def __pow__(self, k):
        if not isinstance(k, int):
            return NotImplemented
        if k < 0:
            return self.inv() ** (-k)
        out = SurdElem.rational(1)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def inv(self):
        """Exact inverse by conjugating away one prime at a time."""
        if self.is_zero():
            raise ZeroDivisionError("inverse of zero surd")
        num = SurdElem.rational(1)
        cur = self
        for p in reversed(self.primes):
            if not any(r % p == 0 for r in cur._c):
                continue
            conj = cur.conjugate(p)
            num = num * conj
            cur = cur * conj
        # cur is now rational and non-zero
        q = cur.rational_part()
        return SurdElem({r: c / q for r, c in num._c.items()})

    # comparison and conversion
    def __eq__(self, other):
        other = _coerce_or_none(other)
        if other is None:
            return NotImplemented
        return self._c == other._c

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self._c.items()))
        return self._hash

    def to_mpf(self, dps=40):
        with mpmath.workdps(dps):
            acc = mpmath.mpf(0)
            for r, c in self._c.items():
                acc += mpmath.mpf(c.numerator) / c.denominator * mpmath.sqrt(r)
            return +acc

    def __float__(self):
        return to_float(self)

    def sign(self):
        """Exact sign (-1, 0 or 1); decided by evaluation at growing precision."""
        if self.is_zero():
            return 0
        if self.is_rational():
            return 1 if self.rational_part() > 0 else -1
        dps = 30
        while True:
            v = self.to_mpf(dps)
            if abs(v) > mpmath.mpf(10) ** (-(dps - 10)):
                return 1 if v > 0 else -1
            dps *= 2
            if dps > 5000:
                raise ArithmeticError("sign undecided")

    def __lt__(self, other):
        return (self - SurdElem.coerce(other)).sign() < 0

    def __le__(self, other):
        return (self - SurdElem.coerce(other)).sign() <= 0

    def __gt__(self, other):
        return (self - SurdElem.coerce(other)).sign() > 0

    def __ge__(self, other):
        return (self - SurdElem.coerce(other)).sign() >= 0

    def __repr__(self):
        return f"SurdElem({to_text(self)!r})"

    def __str__(self):
        return to_text(self)


def _coerce_or_none(v):
    if isinstance(v, SurdElem):
        return v
    if isinstance(v, (int, Fraction, np.integer)):
        return SurdElem.rational(v)
    return None


ZERO = SurdElem()
ONE = SurdElem.rational(1)


def surd_add(a, b):
    return SurdElem.coerce(a) + SurdElem.coerce(b)


def surd_mul(a, b):
    return SurdElem.coerce(a) * SurdElem.coerce(b)


def surd_inv(a):
    return SurdElem.coerce(a).inv()


def to_float(a):
    """Nearest double to the exact value (evaluated with 40 digits)."""
    a = SurdElem.coerce(a)
    if a.is_zero():
        return 0.0
    return float(a.to_mpf(40))


def _sqrt_rational(q):
    if q < 0:
        raise NotRepresentable(f"sqrt of negative rational {q}")
    if q == 0:
        return ZERO
    n, d = q.numerator, q.denominator
    s, r = _squarefree_split(n * d)
    return SurdElem({r: Fraction(s, d)})


def _sqrt(a, depth):
    if depth > _MAX_SQRT_DEPTH:
        raise NotRepresentable("square root needs nested radicals")
    if a.is_zero():
        return ZERO
    if a.is_rational():
        return _sqrt_rational(a.rational_part())
    if a.sign() < 0:
        raise NotRepresentable("square root of a negative number")
    # sqrt(x + y sqrt(p)) = u + v sqrt(p) with u^2 + p v^2 = x and 2 u v = y
    p = a.primes[-1]
    x, y = a.split(p)
    D = x * x - p * y * y
    if D.sign() < 0:
        raise NotRepresentable(f"{to_text(a)} is not a square in a multi-quadratic field")
    d = _sqrt(D, depth + 1)
    # a root u + v sqrt(p) with u, v free of sqrt(p) forces sqrt(D) = u^2 - p v^2
    # to be free of it too; otherwise the descent below never terminates
    if p in d.primes:
        raise NotRepresentable(f"{to_text(a)} is not a square in a multi-quadratic field")
    for cand in ((x + d) / 2, (x - d) / 2):
        if cand.sign() <= 0:
            continue
        try:
            u = _sqrt(cand, depth + 1)
        except NotRepresentable:
            continue
        v = y / (2 * u)
        b = u + v * SurdElem.sqrt_int(p)
        if b * b == a:
            return b if b.sign() > 0 else -b
    raise NotRepresentable(f"{to_text(a)} is not a square in a multi-quadratic field")


def surd_sqrt(a):
    """Exact non-negative square root, extending the field as needed.

    Raises
    ------
    NotRepresentable
        When the root is not an element of any multi-quadratic field, for
        example ``sqrt(1 + sqrt(2))``.
    """
    a = SurdElem.coerce(a)
    b = _sqrt(a, 0)
    if b * b != a:  # pragma: no cover - guarded above
        raise NotRepresentable("square root check failed")
    return b


# text format ---------------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(\d+(?:\.\d+)?)|s(\d+)|(.))")


def _tokenize(text):
    toks = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:  # only trailing whitespace left
            break
        num, rad, op = m.groups()
        if num is not None:
            toks.append(("num", num))
        elif rad is not None:
            toks.append(("rad", int(rad)))
        elif op.strip():
            if op not in "+-*/()":
                raise ValueError(f"unexpected character {op!r} in {text!r}")
            toks.append(("op", op))
        pos = m.end()
    return toks


class _Parser:
    def __init__(self, text):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else (None, None)

    def take(self):
        t = self.peek()
        self.i += 1
        return t

    def expect(self, op):
        t = self.take()
        if t != ("op", op):
            raise ValueError(f"expected {op!r} in {self.text!r}")

    def parse(self):
        if not self.toks:
            raise ValueError("empty surd expression")
        v = self.expr()
        if self.i != len(self.toks):
            raise ValueError(f"trailing input in {self.text!r}")
        return v

    def expr(self):
        v = self.term()
        while self.peek() in (("op", "+"), ("op", "-")):
            op = self.take()[1]
            w = self.term()
            v = v + w if op == "+" else v - w
        return v

    def term(self):
        v = self.unary()
        while True:
            t = self.peek()
            if t in (("op", "*"), ("op", "/")):
                self.take()
                w = self.unary()
                v = v * w if t[1] == "*" else v / w
            elif t[0] in ("num", "rad") or t == ("op", "("):
                v = v * self.unary()  # implicit product, e.g. 3s5
            else:
                return v

    def unary(self):
        t = self.peek()
        if t == ("op", "-"):
            self.take()
            return -self.unary()
        if t == ("op", "+"):
            self.take()
            return self.unary()
        return self.primary()

    def primary(self):
        kind, val = self.take()
        if kind == "num":
            return SurdElem.rational(Fraction(val))
        if kind == "rad":
            return SurdElem.sqrt_int(val)
        if (kind, val) == ("op", "("):
            v = self.expr()
            self.expect(")")
            return v
        raise ValueError(f"unexpected token {val!r} in {self.text!r}")


def parse(text):
    """Parse the surd text format, e.g. ``"(1+s7)/8"``."""
    return _Parser(str(text)).parse()


def to_text(a):
    """Canonical text form accepted by :func:`parse`."""
    a = SurdElem.coerce(a)
    if a.is_zero():
        return "0"
    parts = []
    for r in sorted(a.coeffs):
        c = a.coeffs[r]
        mag = abs(c)
        if r == 1:
            body = str(mag)
        elif mag == 1:
            body = f"s{r}"
        else:
            body = f"{mag}*s{r}"
        sign = "-" if c < 0 else "+"
        parts.append((sign, body))
    out = ("-" if parts[0][0] == "-" else "") + parts[0][1]
    for sign, body in parts[1:]:
        out += f" {sign} {body}"
    return out


# matrices ------------------------------------------------------------------

class SurdMatrix:
    """Dense matrix of :class:`SurdElem` entries."""

    def __init__(self, rows):
        rows = [[SurdElem.coerce(v) for v in row] for row in rows]
        if not rows or any(len(r) != len(rows[0]) for r in rows):
            raise DimensionMismatch("ragged or empty surd matrix")
        self.rows = len(rows)
        self.cols = len(rows[0])
        self._e = rows

    @classmethod
    def zeros(cls, r, c=None):
        c = r if c is None else c
        return cls([[ZERO] * c for _ in range(r)])

    @classmethod
    def identity(cls, n):
        return cls([[ONE if i == j else ZERO for j in range(n)] for i in range(n)])

    @classmethod
    def parse(cls, rows, scale=None):
        """From nested lists of surd strings, optionally times a surd ``scale``."""
        m = cls([[parse(v) if isinstance(v, str) else v for v in row] for row in rows])
        return m * SurdElem.coerce(scale) if scale is not None else m

    @property
    def shape(self):
        return (self.rows, self.cols)

    def __getitem__(self, ij):
        i, j = ij
        return self._e[i][j]

    def tolist(self):
        return [list(r) for r in self._e]

    def to_text(self):
        return [[to_text(v) for v in row] for row in self._e]

    @property
    def T(self):
        return SurdMatrix([[self._e[i][j] for i in range(self.rows)] for j in range(self.cols)])

    def _check_same(self, other):
        if self.shape != other.shape:
            raise DimensionMismatch(f"shapes {self.shape} and {other.shape} differ")

    def __add__(self, other):
        self._check_same(other)
        return SurdMatrix([[a + b for a, b in zip(r, s)] for r, s in zip(self._e, other._e)])

    def __sub__(self, other):
        self._check_same(other)
        return SurdMatrix([[a - b for a, b in zip(r, s)] for r, s in zip(self._e, other._e)])

    def __neg__(self):
        return SurdMatrix([[-a for a in r] for r in self._e])

    def __mul__(self, k):
        k = SurdElem.coerce(k)
        return SurdMatrix([[a * k for a in r] for r in self._e])

    __rmul__ = __mul__

    def __matmul__(self, other):
        if self.cols != other.rows:
            raise DimensionMismatch(f"cannot multiply {self.shape} by {other.shape}")
        cols = [[other._e[k][j] for k in range(other.rows)] for j in range(other.cols)]
        return SurdMatrix([
            [reduce(lambda s, t: s + t, (a * b for a, b in zip(row, col)), ZERO) for col in cols]
            for row in self._e
        ])

    def __eq__(self, other):
        if not isinstance(other, SurdMatrix):
            return NotImplemented
        return self.shape == other.shape and self._e == other._e

    def is_zero(self):
        return all(v.is_zero() for r in self._e for v in r)

    def is_symmetric(self):
        return self == self.T

    def is_lower_triangular(self):
        return all(self._e[i][j].is_zero() for i in range(self.rows) for j in range(i + 1, self.cols))

    def inv(self):
        """Exact inverse by Gauss-Jordan elimination."""
        if self.rows != self.cols:
            raise DimensionMismatch("inverse of a non-square matrix")
        n = self.rows
        a = [list(r) + [ONE if i == j else ZERO for j in range(n)] for i, r in enumerate(self._e)]
        for c in range(n):
            piv = next((r for r in range(c, n) if not a[r][c].is_zero()), None)
            if piv is None:
                raise ZeroDivisionError("matrix is exactly singular")
            a[c], a[piv] = a[piv], a[c]
            ip = a[c][c].inv()
            a[c] = [v * ip for v in a[c]]
            for r in range(n):
                if r != c and not a[r][c].is_zero():
                    f = a[r][c]
                    a[r] = [v - f * w for v, w in zip(a[r], a[c])]
        return SurdMatrix([row[n:] for row in a])

    def to_float(self):
        return np.array([[to_float(v) for v in r] for r in self._e])

    @property
    def primes(self):
        ps = set()
        for r in self._e:
            for v in r:
                ps.update(v.primes)
        return sorted(ps)

    def __repr__(self):
        return f"SurdMatrix({self.to_text()!r})"


def exact_cholesky(X):
    """Lower-triangular ``L`` with ``L L^T = X`` exactly.

    Raises
    ------
    NotPositive
        A pivot is zero or negative.
    NotRepresentable
        A pivot's square root is not in any multi-quadratic field.
    """
    if X.rows != X.cols:
        raise DimensionMismatch("Cholesky of a non-square matrix")
    if not X.is_symmetric():
        raise ValueError("matrix is not exactly symmetric")
    n = X.rows
    L = [[ZERO] * n for _ in range(n)]
    for j in range(n):
        piv = X[j, j] - reduce(lambda s, t: s + t, (L[j][k] * L[j][k] for k in range(j)), ZERO)
        if piv.sign() <= 0:
            raise NotPositive(f"pivot {j} is not positive: {to_text(piv)}")
        L[j][j] = surd_sqrt(piv)
        inv_ljj = L[j][j].inv()
        for i in range(j + 1, n):
            acc = X[i, j] - reduce(lambda s, t: s + t, (L[i][k] * L[j][k] for k in range(j)), ZERO)
            L[i][j] = acc * inv_ljj
    return SurdMatrix(L)


def exact_scalar_solve(p0, p1):
    """Maximal solution of ``x = p0 - p1**2 / x`` and its factor ``h0 + h1 z^{-1}``.

    Returns a dict with ``x = (p0 + sqrt(p0**2 - 4 p1**2)) / 2``,
    ``h0 = sqrt(x)`` and ``h1 = p1 / h0``.
    """
    p0 = SurdElem.coerce(p0)
    p1 = SurdElem.coerce(p1)
    if p0.sign() <= 0:
        raise NotPositive("p0 must be positive")
    disc = p0 * p0 - 4 * p1 * p1
    if disc.sign() < 0:
        raise NoRealFactorization("p0**2 - 4 p1**2 < 0: the polynomial is negative somewhere on the circle")
    x = (p0 + surd_sqrt(disc)) / 2
    h0 = surd_sqrt(x)
    h1 = p1 / h0
    return {"x": x, "h0": h0, "h1": h1}


class ExactLaurentPoly:
    """Matrix Laurent polynomial with :class:`SurdMatrix` coefficients."""

    def __init__(self, coeffs):
        self.coeffs = {int(k): v for k, v in coeffs.items()}
        shapes = {v.shape for v in self.coeffs.values()}
        if len(shapes) != 1:
            raise DimensionMismatch("coefficients must share one square shape")
        self.r = shapes.pop()[0]

    @classmethod
    def from_one_sided(cls, coeffs):
        """Para-Hermitian polynomial from ``P_0 .. P_m`` (``P_{-k} = P_k^T``)."""
        out = {0: coeffs[0]}
        for k, c in enumerate(coeffs[1:], start=1):
            out[k] = c
            out[-k] = c.T
        return cls(out)

    @property
    def m(self):
        return max(abs(k) for k in self.coeffs)

    def coeff(self, k):
        c = self.coeffs.get(k)
        return c if c is not None else SurdMatrix.zeros(self.r)

    def is_para_hermitian(self):
        keys = set(self.coeffs) | {-k for k in self.coeffs}
        return all(self.coeff(-k) == self.coeff(k).T for k in keys)

    def to_float(self):
        from .matpoly import MatLaurentPoly

        return MatLaurentPoly({k: v.to_float() for k, v in self.coeffs.items()}, r=self.r)

    def block_embed(self):
        """Exact analogue of :func:`matpoly.block_embed`."""
        m, r = self.m, self.r
        if m == 1:
            return self.coeff(0), self.coeff(1)
        P0 = [[ZERO] * (m * r) for _ in range(m * r)]
        P1 = [[ZERO] * (m * r) for _ in range(m * r)]
        for i in range(m):
            for j in range(m):
                A = self.coeff(j - i)
                k = m + j - i
                B = self.coeff(k) if k <= m else None
                for a in range(r):
                    for b in range(r):
                        P0[i * r + a][j * r + b] = A[a, b]
                        if B is not None:
                            P1[i * r + a][j * r + b] = B[a, b]
        return SurdMatrix(P0), SurdMatrix(P1)

    def to_text(self):
        return {str(k): self.coeffs[k].to_text() for k in sorted(self.coeffs)}


def exact_factor_product(hs):
    """Exact ``H(z) H(z)^*`` for ``H(z) = sum_j hs[j] z^{-j}``."""
    m = len(hs) - 1
    out = {}
    for k in range(-m, m + 1):
        acc = SurdMatrix.zeros(hs[0].rows)
        for j in range(m + 1):
            if 0 <= j + k <= m:
                acc = acc + hs[j] @ hs[j + k].T
        out[k] = acc
    return ExactLaurentPoly(out)


def exact_verify(P, X, H0, H1):
    """Check the factorization identities exactly.

    Parameters
    ----------
    P : ExactLaurentPoly or tuple
        Degree-one polynomial, or its ``(P0, P1)`` pair.
    X, H0, H1 : SurdMatrix

    Returns
    -------
    dict
        ``nme_ok`` (``X - P0 + P1^T X^{-1} P1 = 0``), ``product_ok``
        (``P0 = H0 H0^T + H1 H1^T``), ``cross_ok`` (``P1 = H0 H1^T``) and
        ``cholesky_ok`` (``H0`` lower triangular, positive diagonal,
        ``H0 H0^T = X``).
    """
    if isinstance(P, ExactLaurentPoly):
        if P.m != 1:
            raise DimensionMismatch("exact_verify needs a degree-one (embedded) polynomial")
        P0, P1 = P.coeff(0), P.coeff(1)
    else:
        P0, P1 = P
    d = P0.rows
    for name, M in (("P1", P1), ("X", X), ("H0", H0), ("H1", H1)):
        if M.shape != (d, d):
            raise DimensionMismatch(f"{name} has shape {M.shape}, expected {(d, d)}")
    nme_ok = (X - P0 + P1.T @ X.inv() @ P1).is_zero()
    product_ok = (P0 - H0 @ H0.T - H1 @ H1.T).is_zero()
    cross_ok = (P1 - H0 @ H1.T).is_zero()
    chol_ok = (
        H0.is_lower_triangular()
        and all(H0[i, i].sign() > 0 for i in range(d))
        and (H0 @ H0.T - X).is_zero()
    )
    return {"nme_ok": nme_ok, "product_ok": product_ok, "cross_ok": cross_ok, "cholesky_ok": chol_ok}
