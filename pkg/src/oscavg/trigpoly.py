"""Exact arithmetic for matrix trigonometric polynomials.

A matrix trigonometric polynomial is a finite sum

    P(t) = sum_over_frequencies  C_f * exp(i*f*t)

with rational frequencies f and matrices C_f of complex rationals.  All
algebra (sums, products, means, derivatives) is exact; floating point enters
only through :meth:`TrigPolyMatrix.eval`.  Frequencies are compared exactly,
so "does this product term land on frequency zero" is a rational-arithmetic
question, never a tolerance question.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

#: Exact scalar type used for frequencies, exponents and rational constants.
Rational = Fraction

#: Frequencies live on the same exact lattice; 0 is the mean slot.
Frequency = Fraction

RationalLike = Union[int, Fraction, str]


def as_rational(value: RationalLike) -> Fraction:
    """Coerce ints, fractions and 'p/q' strings to an exact Fraction."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value)
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"not a rational: {value!r}") from exc
    raise TypeError(f"cannot interpret {type(value).__name__} as a rational")


@dataclass(frozen=True)
class ComplexRational:
    """A complex number with exact rational real and imaginary parts."""

    re: Fraction = Fraction(0)
    im: Fraction = Fraction(0)

    def __post_init__(self):
        object.__setattr__(self, "re", as_rational(self.re))
        object.__setattr__(self, "im", as_rational(self.im))

    def __add__(self, other: "ComplexRational") -> "ComplexRational":
        return ComplexRational(self.re + other.re, self.im + other.im)

    def __sub__(self, other: "ComplexRational") -> "ComplexRational":
        return ComplexRational(self.re - other.re, self.im - other.im)

    def __mul__(self, other: "ComplexRational") -> "ComplexRational":
        return ComplexRational(
            self.re * other.re - self.im * other.im,
            self.re * other.im + self.im * other.re,
        )

    def __neg__(self) -> "ComplexRational":
        return ComplexRational(-self.re, -self.im)

    def __truediv__(self, other: "ComplexRational") -> "ComplexRational":
        denom = other.re * other.re + other.im * other.im
        if denom == 0:
            raise ZeroDivisionError("division by complex zero")
        return ComplexRational(
            (self.re * other.re + self.im * other.im) / denom,
            (self.im * other.re - self.re * other.im) / denom,
        )

    def conjugate(self) -> "ComplexRational":
        return ComplexRational(self.re, -self.im)

    @property
    def is_zero(self) -> bool:
        return self.re == 0 and self.im == 0

    def modulus_bound(self) -> Fraction:
        """|re| + |im| -- an exact rational upper bound on the modulus."""
        return abs(self.re) + abs(self.im)

    def __complex__(self) -> complex:
        return complex(float(self.re), float(self.im))

    def __str__(self) -> str:
        if self.im == 0:
            return str(self.re)
        return f"{self.re}{'+' if self.im >= 0 else '-'}{abs(self.im)}i"


CQ = ComplexRational

CQLike = Union[ComplexRational, int, Fraction, tuple]


def cq(value: CQLike) -> ComplexRational:
    """Coerce an int, Fraction, (re, im) pair or ComplexRational to CQ."""
    if isinstance(value, ComplexRational):
        return value
    if isinstance(value, tuple):
        re, im = value
        return ComplexRational(as_rational(re), as_rational(im))
    return ComplexRational(as_rational(value))


CQMatrix = tuple  # n rows, each a tuple of ComplexRational


def mat_from(rows: Sequence[Sequence[CQLike]]) -> CQMatrix:
    return tuple(tuple(cq(x) for x in row) for row in rows)


def mat_zero(n: int) -> CQMatrix:
    z = ComplexRational()
    return tuple(tuple(z for _ in range(n)) for _ in range(n))


def mat_identity(n: int) -> CQMatrix:
    one, zero = ComplexRational(Fraction(1)), ComplexRational()
    return tuple(tuple(one if i == j else zero for j in range(n)) for i in range(n))


def mat_add(a: CQMatrix, b: CQMatrix) -> CQMatrix:
    return tuple(tuple(x + y for x, y in zip(ra, rb)) for ra, rb in zip(a, b))


def mat_sub(a: CQMatrix, b: CQMatrix) -> CQMatrix:
    return tuple(tuple(x - y for x, y in zip(ra, rb)) for ra, rb in zip(a, b))


def mat_neg(a: CQMatrix) -> CQMatrix:
    return tuple(tuple(-x for x in row) for row in a)


def mat_scale(a: CQMatrix, s: CQLike) -> CQMatrix:
    s = cq(s)
    return tuple(tuple(x * s for x in row) for row in a)


def mat_mul(a: CQMatrix, b: CQMatrix) -> CQMatrix:
    n = len(a)
    m = len(b[0])
    k = len(b)
    out = []
    for i in range(n):
        row = []
        for j in range(m):
            acc = ComplexRational()
            for r in range(k):
                acc = acc + a[i][r] * b[r][j]
            row.append(acc)
        out.append(tuple(row))
    return tuple(out)


def mat_conj(a: CQMatrix) -> CQMatrix:
    return tuple(tuple(x.conjugate() for x in row) for row in a)


def mat_is_zero(a: CQMatrix) -> bool:
    return all(x.is_zero for row in a for x in row)


def mat_entry_norm(a: CQMatrix) -> Fraction:
    """Sum of entrywise modulus bounds (exact; dominates the operator norm)."""
    return sum((x.modulus_bound() for row in a for x in row), Fraction(0))


def mat_to_numpy(a: CQMatrix) -> np.ndarray:
    return np.array([[complex(x) for x in row] for row in a], dtype=complex)


class TrigPolyMatrix:
    """An n-by-n matrix trigonometric polynomial over a rational frequency set.

    Immutable.  Terms are stored sorted by frequency; all-zero coefficient
    matrices are pruned at construction, so an empty term tuple is the zero
    polynomial.
    """

    __slots__ = ("dim", "_terms")

    def __init__(self, dim: int, terms: Mapping[Fraction, CQMatrix]):
        if dim < 1:
            raise ValueError("dimension must be positive")
        cleaned = {}
        for freq, matrix in terms.items():
            freq = as_rational(freq)
            if len(matrix) != dim or any(len(row) != dim for row in matrix):
                raise ValueError(f"coefficient at frequency {freq} is not {dim}x{dim}")
            if mat_is_zero(matrix):
                continue
            if freq in cleaned:
                raise ValueError(f"duplicate frequency {freq}")
            cleaned[freq] = matrix
        object.__setattr__(self, "dim", dim)
        object.__setattr__(
            self, "_terms", tuple(sorted(cleaned.items(), key=lambda kv: kv[0]))
        )

    def __setattr__(self, name, value):
        raise AttributeError("TrigPolyMatrix is immutable")

    # -- constructors -------------------------------------------------------

    @classmethod
    def zero(cls, dim: int) -> "TrigPolyMatrix":
        return cls(dim, {})

    @classmethod
    def constant(cls, matrix: Sequence[Sequence[CQLike]]) -> "TrigPolyMatrix":
        m = mat_from(matrix)
        return cls(len(m), {Fraction(0): m})

    @classmethod
    def identity(cls, dim: int) -> "TrigPolyMatrix":
        return cls(dim, {Fraction(0): mat_identity(dim)})

    @classmethod
    def single(
        cls, freq: RationalLike, matrix: Sequence[Sequence[CQLike]]
    ) -> "TrigPolyMatrix":
        m = mat_from(matrix)
        return cls(len(m), {as_rational(freq): m})

    @classmethod
    def from_terms(
        cls, dim: int, terms: Iterable[tuple]
    ) -> "TrigPolyMatrix":
        acc: dict = {}
        for freq, matrix in terms:
            freq = as_rational(freq)
            m = mat_from(matrix)
            acc[freq] = mat_add(acc[freq], m) if freq in acc else m
        return cls(dim, acc)

    # -- inspection ----------------------------------------------------------

    @property
    def terms(self) -> tuple:
        """Sorted tuple of (frequency, coefficient-matrix) pairs."""
        return self._terms

    @property
    def frequencies(self) -> tuple:
        return tuple(f for f, _ in self._terms)

    def coefficient(self, freq: RationalLike) -> CQMatrix:
        freq = as_rational(freq)
        for f, m in self._terms:
            if f == freq:
                return m
        return mat_zero(self.dim)

    @property
    def is_zero(self) -> bool:
        return not self._terms

    def is_real_valued(self) -> bool:
        """True iff coefficient(-f) is the elementwise conjugate of coefficient(f)."""
        table = dict(self._terms)
        for f, m in self._terms:
            other = table.get(-f)
            if other is None or mat_conj(m) != other:
                return False
        return True

    def term_count(self) -> int:
        return len(self._terms)

    def entry_norm(self) -> Fraction:
        """Sum of entrywise modulus bounds over all terms.

        Upper-bounds sup_t of the operator norm of the evaluated matrix.
        """
        return sum((mat_entry_norm(m) for _, m in self._terms), Fraction(0))

    # -- algebra -------------------------------------------------------------

    def _require_same_dim(self, other: "TrigPolyMatrix"):
        if self.dim != other.dim:
            raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")

    def __add__(self, other: "TrigPolyMatrix") -> "TrigPolyMatrix":
        self._require_same_dim(other)
        acc = dict(self._terms)
        for f, m in other._terms:
            acc[f] = mat_add(acc[f], m) if f in acc else m
        return TrigPolyMatrix(self.dim, acc)

    def __sub__(self, other: "TrigPolyMatrix") -> "TrigPolyMatrix":
        return self + (-other)

    def __neg__(self) -> "TrigPolyMatrix":
        return TrigPolyMatrix(self.dim, {f: mat_neg(m) for f, m in self._terms})

    def __matmul__(self, other: "TrigPolyMatrix") -> "TrigPolyMatrix":
        """Matrix product; product-term frequency is the sum of factor frequencies."""
        self._require_same_dim(other)
        acc: dict = {}
        for f1, m1 in self._terms:
            for f2, m2 in other._terms:
                f = f1 + f2
                p = mat_mul(m1, m2)
                acc[f] = mat_add(acc[f], p) if f in acc else p
        return TrigPolyMatrix(self.dim, acc)

    def scale(self, s: CQLike) -> "TrigPolyMatrix":
        s = cq(s)
        return TrigPolyMatrix(self.dim, {f: mat_scale(m, s) for f, m in self._terms})

    def conjugate(self) -> "TrigPolyMatrix":
        """Pointwise complex conjugate (frequencies negate)."""
        return TrigPolyMatrix(self.dim, {-f: mat_conj(m) for f, m in self._terms})

    def mean(self) -> CQMatrix:
        """The constant (frequency-zero) coefficient; zero matrix if absent."""
        return self.coefficient(Fraction(0))

    def subtract_mean(self) -> "TrigPolyMatrix":
        return TrigPolyMatrix(
            self.dim, {f: m for f, m in self._terms if f != 0}
        )

    def derivative(self) -> "TrigPolyMatrix":
        """d/dt: each coefficient picks up a factor i*f; the mean term vanishes."""
        out = {}
        for f, m in self._terms:
            if f == 0:
                continue
            out[f] = mat_scale(m, ComplexRational(Fraction(0), f))
        return TrigPolyMatrix(self.dim, out)

    def left_mul_const(self, matrix: CQMatrix) -> "TrigPolyMatrix":
        return TrigPolyMatrix(
            self.dim, {f: mat_mul(matrix, m) for f, m in self._terms}
        )

    def right_mul_const(self, matrix: CQMatrix) -> "TrigPolyMatrix":
        return TrigPolyMatrix(
            self.dim, {f: mat_mul(m, matrix) for f, m in self._terms}
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, TrigPolyMatrix):
            return NotImplemented
        return self.dim == other.dim and self._terms == other._terms

    def __hash__(self):
        return hash((self.dim, self._terms))

    # -- evaluation ----------------------------------------------------------

    def eval(self, t: float) -> np.ndarray:
        """Evaluate at time t in floating point (complex matrix)."""
        out = np.zeros((self.dim, self.dim), dtype=complex)
        for f, m in self._terms:
            out += mat_to_numpy(m) * cmath.exp(1j * float(f) * t)
        return out

    def eval_real(self, t: float) -> np.ndarray:
        """Evaluate and drop the (tiny) imaginary residue of a real-valued polynomial."""
        return self.eval(t).real

    def __repr__(self) -> str:
        if not self._terms:
            return f"TrigPolyMatrix.zero({self.dim})"
        freqs = ", ".join(str(f) for f in self.frequencies)
        return f"<TrigPolyMatrix dim={self.dim} frequencies=[{freqs}]>"
