"""Algebra of t^(-j*alpha)-graded oscillatory series.

A graded series is  X(t) = sum_{j=0..k} t^(-j*alpha) * X_j(t)  with each grade
X_j a :class:`~oscavg.trigpoly.TrigPolyMatrix`.  Both the coefficient matrix of
the input system and the averaging change of variables have this shape.
Differentiation produces, besides the gradewise oscillatory derivative, the
power-law terms -j*alpha * t^(-j*alpha-1) * X_j(t); those are returned
separately because they decay one order faster and feed the remainder bundle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .trigpoly import Rational, TrigPolyMatrix, as_rational

#: (grade, polynomial) pairs; the grade fixes the decay exponent of the piece.
GradedTerms = tuple


class GradedOscSeries:
    """Immutable graded oscillatory series sum_j t^(-j*alpha) X_j(t)."""

    __slots__ = ("alpha", "grades")

    def __init__(self, alpha, grades: Sequence[TrigPolyMatrix]):
        alpha = as_rational(alpha)
        if alpha <= 0:
            raise ValueError("alpha must be positive")
        grades = tuple(grades)
        if not grades:
            raise ValueError("need at least grade 0")
        dim = grades[0].dim
        if any(g.dim != dim for g in grades):
            raise ValueError("all grades must share the same dimension")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "grades", grades)

    def __setattr__(self, name, value):
        raise AttributeError("GradedOscSeries is immutable")

    @classmethod
    def identity(cls, dim: int, alpha) -> "GradedOscSeries":
        return cls(alpha, (TrigPolyMatrix.identity(dim),))

    @property
    def dim(self) -> int:
        return self.grades[0].dim

    @property
    def order(self) -> int:
        """Highest grade index k."""
        return len(self.grades) - 1

    def grade(self, j: int) -> TrigPolyMatrix:
        if 0 <= j < len(self.grades):
            return self.grades[j]
        return TrigPolyMatrix.zero(self.dim)

    def _require_compatible(self, other: "GradedOscSeries"):
        if self.alpha != other.alpha:
            raise ValueError(f"alpha mismatch: {self.alpha} vs {other.alpha}")
        if self.dim != other.dim:
            raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")

    def __eq__(self, other) -> bool:
        if not isinstance(other, GradedOscSeries):
            return NotImplemented
        return (
            self.alpha == other.alpha
            and self.dim == other.dim
            and list(self.grades) == list(other.grades)
        )

    def mul(self, other: "GradedOscSeries", cutoff: int):
        """Graded product, truncated at ``cutoff``.

        Returns ``(series, overflow)`` where the series collects grades
        g <= cutoff (grade g is sum_{i+j=g} X_i Y_j) and overflow holds the
        nonzero (grade, polynomial) pairs with g > cutoff.
        """
        self._require_compatible(other)
        zero = TrigPolyMatrix.zero(self.dim)
        max_grade = self.order + other.order
        acc = [zero] * (max_grade + 1)
        for i, xi in enumerate(self.grades):
            if xi.is_zero:
                continue
            for j, yj in enumerate(other.grades):
                if yj.is_zero:
                    continue
                acc[i + j] = acc[i + j] + (xi @ yj)
        kept = acc[: cutoff + 1]
        kept += [zero] * (cutoff + 1 - len(kept))
        overflow = [
            (g, p) for g, p in enumerate(acc) if g > cutoff and not p.is_zero
        ]
        return GradedOscSeries(self.alpha, kept), overflow

    def derivative(self):
        """Split d/dt into its oscillatory part and grade-shifted power terms.

        Returns ``(osc, power_terms)``: ``osc`` has grades d/dt X_j(t), and
        ``power_terms`` is a list of (j, -j*alpha*X_j(t)) pairs, each standing
        for a contribution -j*alpha * t^(-j*alpha-1) * X_j(t) whose overall
        decay exponent is 1 + j*alpha.
        """
        osc = GradedOscSeries(self.alpha, [g.derivative() for g in self.grades])
        power_terms = []
        for j, g in enumerate(self.grades):
            if j == 0 or g.is_zero:
                continue
            power_terms.append((j, g.scale(-j * self.alpha)))
        return osc, power_terms

    def eval(self, t: float) -> np.ndarray:
        """Floating-point value sum_j t^(-j*alpha) X_j(t); requires t > 0."""
        if t <= 0:
            raise ValueError("graded series are defined for t > 0")
        a = float(self.alpha)
        out = np.zeros((self.dim, self.dim), dtype=complex)
        for j, g in enumerate(self.grades):
            if g.is_zero:
                continue
            out += t ** (-j * a) * g.eval(t)
        return out

    def tail_norm_bound(self, t: float) -> float:
        """Upper bound for the operator norm of the j >= 1 part at time t."""
        a = float(self.alpha)
        return sum(
            float(g.entry_norm()) * t ** (-j * a)
            for j, g in enumerate(self.grades)
            if j >= 1 and not g.is_zero
        )

    def invertibility_threshold(self, max_exponent: int = 10000) -> int:
        """Smallest power of two t* with sum_{j>=1} t*^(-j*alpha) ||X_j|| <= 1/2.

        Requires grade 0 to be the identity; the Neumann series then certifies
        that the evaluated series is invertible (smallest singular value at
        least 1/2) for every t >= t*.  The comparison is exact rational
        arithmetic whenever the exponents m*j*alpha are integral, and float
        arithmetic with a conservative 1e-12 inflation otherwise.
        """
        if self.grades[0] != TrigPolyMatrix.identity(self.dim):
            raise ValueError("grade 0 must be the identity polynomial")
        norms = [
            (j, g.entry_norm())
            for j, g in enumerate(self.grades)
            if j >= 1 and not g.is_zero
        ]
        if not norms:
            return 1
        half = Fraction(1, 2)
        for m in range(max_exponent + 1):
            exponents = [m * j * self.alpha for j, _ in norms]
            if all(e.denominator == 1 for e in exponents):
                total = sum(
                    (n / Fraction(2) ** int(e) for (_, n), e in zip(norms, exponents)),
                    Fraction(0),
                )
                if total <= half:
                    return 2 ** m
            else:
                total_f = sum(
                    float(n) * 2.0 ** (-float(e))
                    for (_, n), e in zip(norms, exponents)
                )
                if total_f * (1.0 + 1e-12) <= 0.5:
                    return 2 ** m
        raise ValueError("no invertibility threshold below 2**max_exponent")


@dataclass(frozen=True)
class RemainderBundle:
    """Everything the averaging step sweeps into the t^-(1+epsilon) remainder.

    * ``s_terms``: (grade, polynomial) pairs from product grades beyond the
      truncation order; a grade-g piece decays like t^(-g*alpha).
    * ``w_terms``: (grade, polynomial) pairs from differentiating the
      transform; a grade-j piece decays like t^(-(1+j*alpha)).
    * ``u_exponent``/``u_bound``: decay exponent 1+delta and norm bound of the
      term induced by a bounded perturbation, when one is present.
    * ``epsilon``: the common decay surplus; every piece above decays at least
      as fast as t^(-(1+epsilon)).
    * ``bound_constant``: explicit constant C with ||remainder(t)|| <= C *
      t^(-(1+epsilon)) for t >= t_star.
    """

    s_terms: GradedTerms
    w_terms: GradedTerms
    u_exponent: Optional[Rational]
    u_bound: float
    epsilon: Rational
    bound_constant: float

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")

    def eval_norm(self, t: float, alpha: float) -> float:
        """Upper bound for the remainder norm at time t (excluding U-terms)."""
        total = 0.0
        for g, p in self.s_terms:
            total += float(p.entry_norm()) * t ** (-g * alpha)
        for j, p in self.w_terms:
            total += float(p.entry_norm()) * t ** (-(1.0 + j * alpha))
        return total


def remainder_exponent(alpha, k: int, delta=None) -> Rational:
    """Decay surplus epsilon = min(alpha, delta, (k+1)*alpha - 1) (> 0)."""
    alpha = as_rational(alpha)
    candidates = [alpha, (k + 1) * alpha - 1]
    if delta is not None:
        candidates.append(as_rational(delta))
    eps = min(candidates)
    if eps <= 0:
        raise ValueError(f"nonpositive remainder exponent {eps}")
    return eps
