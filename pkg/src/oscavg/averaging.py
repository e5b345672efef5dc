"""Averaging transform for systems with oscillatory decreasing coefficients.

Input systems have the shape

    dx/dt = { A0 + sum_{j=1..k} t^(-j*alpha) A_j(t) } x  +  t^-(1+delta) F(t) x

with trig-polynomial grades A_j(t) and k fixed by 0 < k*alpha <= 1 <
(k+1)*alpha.  :func:`average_system` builds a change of variables
x = {I + sum t^(-j*alpha) Y_j(t)} y, grade by grade, so that the transformed
principal part has constant matrices only; everything left over is collected
into an explicit t^-(1+epsilon) remainder bundle.

Each grade is obtained by solving the linear matrix ODE

    dY_j/dt - A0 Y_j + Y_j A0 = B_j(t)

frequency by frequency: for each nonzero frequency f this is a shifted
Sylvester equation  i*f*y - A0 y + y A0 = b_f  solved exactly over complex
rationals, and the constant matrix A_j is chosen as the mean of the right-hand
side so the residual right-hand side has mean zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .errors import ConstraintError, PipelineError, ResonanceError
from .series import GradedOscSeries, RemainderBundle, remainder_exponent
from .trigpoly import (
    CQMatrix,
    ComplexRational,
    Rational,
    TrigPolyMatrix,
    as_rational,
    mat_add,
    mat_from,
    mat_is_zero,
    mat_mul,
    mat_neg,
    mat_scale,
    mat_sub,
    mat_to_numpy,
    mat_zero,
)


def choose_k(alpha, delta=None):
    """Grade count k with k*alpha <= 1 < (k+1)*alpha, and the remainder surplus.

    Returns ``(k, epsilon)`` with epsilon = min(alpha, delta, (k+1)*alpha - 1);
    delta is ignored when no perturbation is present.
    """
    alpha = as_rational(alpha)
    if alpha <= 0 or alpha > 1:
        raise ConstraintError(f"alpha must lie in (0, 1], got {alpha}")
    k = int(1 / alpha)  # floor; equals 1/alpha when integral, then k*alpha == 1
    assert k * alpha <= 1 < (k + 1) * alpha
    return k, remainder_exponent(alpha, k, delta)


@dataclass(frozen=True)
class Perturbation:
    """Bound descriptor for an extra t^-(1+delta) F(t) term with ||F|| <= bound."""

    delta: Rational
    bound: float

    def __post_init__(self):
        object.__setattr__(self, "delta", as_rational(self.delta))
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if self.bound <= 0:
            raise ValueError("perturbation bound must be positive")


@dataclass(frozen=True)
class SystemSpec:
    """The input system: constant part a0, exponent alpha, grades A_1..A_k.

    The grade count must be exactly the k determined by alpha; pad with zero
    polynomials for grades that are absent.  When ``real`` is set, every grade
    must be a real-valued trigonometric polynomial.
    """

    a0: CQMatrix
    alpha: Rational
    grades: tuple
    perturbation: Optional[Perturbation] = None
    real: bool = False

    def __post_init__(self):
        object.__setattr__(self, "alpha", as_rational(self.alpha))
        object.__setattr__(self, "a0", mat_from(self.a0))
        object.__setattr__(self, "grades", tuple(self.grades))
        n = len(self.a0)
        if any(len(row) != n for row in self.a0):
            raise ValueError("a0 must be square")
        for idx, g in enumerate(self.grades):
            if g.dim != n:
                raise ValueError(f"grade {idx + 1} has dimension {g.dim}, expected {n}")
        delta = self.perturbation.delta if self.perturbation else None
        k, _ = choose_k(self.alpha, delta)
        if len(self.grades) != k:
            raise ConstraintError(
                f"alpha={self.alpha} requires exactly k={k} grades "
                f"(k*alpha <= 1 < (k+1)*alpha), got {len(self.grades)}"
            )
        if self.real:
            for idx, g in enumerate(self.grades):
                if not g.is_real_valued():
                    raise ValueError(f"grade {idx + 1} is not real-valued")

    @property
    def dim(self) -> int:
        return len(self.a0)

    @property
    def k(self) -> int:
        return len(self.grades)


@dataclass(frozen=True)
class AveragedSystem:
    """Result of the averaging transform.

    ``averaged`` lists the constant matrices A_0..A_k (A_0 is the input a0),
    ``transform`` is the graded change of variables with identity grade 0 and
    zero-mean higher grades, and ``remainder`` bounds everything swept into
    the t^-(1+epsilon) tail.  The transform is certifiably invertible for
    t >= ``t_star``.
    """

    averaged: tuple
    transform: GradedOscSeries
    remainder: RemainderBundle
    t_star: int

    @property
    def epsilon(self) -> Rational:
        return self.remainder.epsilon

    def averaged_float(self):
        return [mat_to_numpy(a) for a in self.averaged]

    def principal_part(self, t: float) -> np.ndarray:
        """Float value of sum_j t^(-j*alpha) A_j."""
        a = float(self.transform.alpha)
        out = np.zeros((self.transform.dim,) * 2, dtype=complex)
        for j, m in enumerate(self.averaged):
            out += t ** (-j * a) * mat_to_numpy(m)
        return out


@dataclass(frozen=True)
class RotationRemoval:
    """Data of the change y = exp(i*R*t) z that makes a diagonal a0 real.

    ``frequency_shifts[p][q]`` is the rational shift added to the frequency of
    every (p, q) matrix element under conjugation by exp(i*R*t).
    """

    r_diag: tuple
    transformed_a0: CQMatrix
    frequency_shifts: tuple

    def apply_to_poly(self, poly: TrigPolyMatrix) -> TrigPolyMatrix:
        """Conjugate a grade matrix: exp(-iRt) P(t) exp(iRt)."""
        n = poly.dim
        pieces = []
        for freq, matrix in poly.terms:
            for p in range(n):
                for q in range(n):
                    entry = matrix[p][q]
                    if entry.is_zero:
                        continue
                    single = [
                        [entry if (p, q) == (r, s) else ComplexRational() for s in range(n)]
                        for r in range(n)
                    ]
                    pieces.append((freq + self.frequency_shifts[p][q], single))
        return TrigPolyMatrix.from_terms(n, pieces)


def remove_rotation(a0) -> RotationRemoval:
    """Split a diagonal a0 into a real part and the rotation i*R it generates.

    Only diagonal matrices are handled; reduce to Jordan/diagonal form first.
    """
    a0 = mat_from(a0)
    n = len(a0)
    for p in range(n):
        for q in range(n):
            if p != q and not a0[p][q].is_zero:
                raise PipelineError(
                    "rotation removal needs a diagonal matrix; "
                    "pre-diagonalize the constant part first"
                )
    r_diag = tuple(a0[p][p].im for p in range(n))
    transformed = tuple(
        tuple(
            ComplexRational(a0[p][p].re) if p == q else ComplexRational()
            for q in range(n)
        )
        for p in range(n)
    )
    shifts = tuple(tuple(r_diag[q] - r_diag[p] for q in range(n)) for p in range(n))
    return RotationRemoval(r_diag=r_diag, transformed_a0=transformed, frequency_shifts=shifts)


# -- exact linear algebra ----------------------------------------------------


def _solve_exact(matrix, rhs):
    """Gaussian elimination over complex rationals; raises on singular input."""
    n = len(matrix)
    m = [row[:] for row in matrix]
    b = rhs[:]
    perm = list(range(n))
    for col in range(n):
        pivot_row = None
        best = None
        for r in range(col, n):
            bound = m[r][col].modulus_bound()
            if bound > 0 and (best is None or bound > best):
                best = bound
                pivot_row = r
        if pivot_row is None:
            raise ZeroDivisionError(f"singular system (column {perm[col]})")
        if pivot_row != col:
            m[col], m[pivot_row] = m[pivot_row], m[col]
            b[col], b[pivot_row] = b[pivot_row], b[col]
            perm[col], perm[pivot_row] = perm[pivot_row], perm[col]
        pivot = m[col][col]
        for r in range(col + 1, n):
            factor = m[r][col]
            if factor.is_zero:
                continue
            factor = factor / pivot
            for c in range(col, n):
                m[r][c] = m[r][c] - factor * m[col][c]
            b[r] = b[r] - factor * b[col]
    x = [ComplexRational() for _ in range(n)]
    for r in range(n - 1, -1, -1):
        acc = b[r]
        for c in range(r + 1, n):
            acc = acc - m[r][c] * x[c]
        x[r] = acc / m[r][r]
    return x


def solve_sylvester(a0, freq, b) -> CQMatrix:
    """Exact solution y of  i*f*y - a0 y + y a0 = b  for a nonzero frequency f.

    Solves the n^2-dimensional linear system over complex rationals, so the
    returned residual is exactly zero.  The system is uniquely solvable
    whenever a0 has a real spectrum; a singular system therefore signals a
    resonant eigenvalue pair, which is reported via the float spectrum.
    """
    freq = as_rational(freq)
    if freq == 0:
        raise ValueError("frequency must be nonzero")
    a0 = mat_from(a0)
    b = mat_from(b)
    n = len(a0)
    i_f = ComplexRational(Fraction(0), freq)
    size = n * n
    rows = []
    for p in range(n):
        for q in range(n):
            row = [ComplexRational() for _ in range(size)]
            for r in range(n):
                row[r * n + q] = row[r * n + q] - a0[p][r]
            for s in range(n):
                row[p * n + s] = row[p * n + s] + a0[s][q]
            row[p * n + q] = row[p * n + q] + i_f
            rows.append(row)
    rhs = [b[p][q] for p in range(n) for q in range(n)]
    try:
        flat = _solve_exact(rows, rhs)
    except ZeroDivisionError as exc:
        raise ResonanceError(_resonance_report(a0, freq)) from exc
    return tuple(tuple(flat[p * n + q] for q in range(n)) for p in range(n))


def _resonance_report(a0: CQMatrix, freq: Fraction) -> str:
    eigs = np.linalg.eigvals(mat_to_numpy(a0))
    n = len(eigs)
    best = None
    for p in range(n):
        for q in range(n):
            gap = abs(1j * float(freq) - (eigs[p] - eigs[q]))
            if best is None or gap < best[0]:
                best = (gap, eigs[p], eigs[q])
    _, mu_p, mu_q = best
    return (
        f"shifted Sylvester system at frequency {freq} is singular: "
        f"i*{freq} collides with eigenvalue pair ({mu_p:.6g}, {mu_q:.6g}); "
        "the constant part does not have a real spectrum"
    )


def solve_homological(a0, b: TrigPolyMatrix) -> TrigPolyMatrix:
    """Zero-mean Y with  dY/dt - a0 Y + Y a0 = b(t), exactly.

    ``b`` must have zero mean; the equation then decouples into one shifted
    Sylvester solve per frequency.
    """
    a0 = mat_from(a0)
    if not mat_is_zero(b.mean()):
        raise ValueError("right-hand side must have zero mean")
    terms = {}
    for freq, matrix in b.terms:
        terms[freq] = solve_sylvester(a0, freq, matrix)
    return TrigPolyMatrix(b.dim, terms)


def homological_residual(a0, y: TrigPolyMatrix, b: TrigPolyMatrix) -> TrigPolyMatrix:
    """dY/dt - a0 Y + Y a0 - b as an exact trigonometric polynomial."""
    a0 = mat_from(a0)
    return y.derivative() - y.left_mul_const(a0) + y.right_mul_const(a0) - b


def averaging_step(j: int, a0, input_grades: Sequence[TrigPolyMatrix],
                   averaged: Sequence[CQMatrix], transforms: Sequence[TrigPolyMatrix]):
    """One grade of the averaging recursion.

    Given the input grades A_1(t)..A_k(t), the previously determined constant
    matrices A_1..A_{j-1} and transform grades Y_1..Y_{j-1}, forms the
    right-hand side

        B_j(t) = sum_{l=0}^{j-1} A_{j-l}(t) Y_l(t) - sum_{l=1}^{j-1} Y_l(t) A_{j-l},

    takes A_j as its mean and solves the homological equation for Y_j against
    the zero-mean part.  Returns ``(A_j, Y_j)``.
    """
    if j < 1:
        raise ValueError("grade index must be >= 1")
    a0 = mat_from(a0)
    n = len(a0)
    identity = TrigPolyMatrix.identity(n)

    def y_grade(l: int) -> TrigPolyMatrix:
        return identity if l == 0 else transforms[l - 1]

    rhs = TrigPolyMatrix.zero(n)
    for l in range(j):
        grade = input_grades[j - l - 1]  # A_{j-l}(t)
        if grade.is_zero:
            continue
        rhs = rhs + (grade @ y_grade(l))
    for l in range(1, j):
        const = averaged[j - l]  # constant A_{j-l}, 0-indexed list A_0..A_{j-1}
        if mat_is_zero(const):
            continue
        rhs = rhs - transforms[l - 1].right_mul_const(const)
    a_j = rhs.mean()
    y_j = solve_homological(a0, rhs.subtract_mean())
    return a_j, y_j


def _require_real_spectrum(a0: CQMatrix):
    a0_f = mat_to_numpy(a0)
    if not a0_f.size:
        return
    eigs = np.linalg.eigvals(a0_f)
    worst = max(abs(e.imag) for e in eigs)
    scale = 1.0 + max(abs(e) for e in eigs)
    if worst > 1e-9 * scale:
        raise PipelineError(
            f"constant part has a non-real spectrum (max |Im| = {worst:.3g}); "
            "apply rotation removal (diagonal case) or pre-transform the system"
        )


def average_system(spec: SystemSpec) -> AveragedSystem:
    """Run the full averaging recursion and assemble the remainder bundle.

    Produces constant matrices A_0..A_k, the graded transform with exact
    zero-mean grades, the grade-(k+1..2k) product leftovers, the power-law
    terms from differentiating the transform, and the induced-perturbation
    data, together with the decay surplus epsilon and an invertibility
    threshold t_star for the transform.
    """
    _require_real_spectrum(spec.a0)
    k = spec.k
    n = spec.dim
    averaged = [spec.a0]
    transforms: list[TrigPolyMatrix] = []
    for j in range(1, k + 1):
        a_j, y_j = averaging_step(j, spec.a0, spec.grades, averaged, transforms)
        averaged.append(a_j)
        transforms.append(y_j)

    transform = GradedOscSeries(
        spec.alpha, [TrigPolyMatrix.identity(n), *transforms]
    )
    coeff_series = GradedOscSeries(
        spec.alpha, [TrigPolyMatrix.constant(spec.a0), *spec.grades]
    )
    averaged_series = GradedOscSeries(
        spec.alpha, [TrigPolyMatrix.constant(a) for a in averaged]
    )

    lt, overflow_lt = coeff_series.mul(transform, cutoff=k)
    tm, overflow_tm = transform.mul(averaged_series, cutoff=k)
    d_osc, w_terms = transform.derivative()
    for g in range(k + 1):
        diff = lt.grade(g) - tm.grade(g) - d_osc.grade(g)
        if not diff.is_zero:
            raise AssertionError(
                f"averaging bookkeeping failed at grade {g}: nonzero residual"
            )

    s_acc: dict = {}
    for g, p in overflow_lt:
        s_acc[g] = s_acc.get(g, TrigPolyMatrix.zero(n)) + p
    for g, p in overflow_tm:
        s_acc[g] = s_acc.get(g, TrigPolyMatrix.zero(n)) - p
    s_terms = tuple(
        (g, p) for g, p in sorted(s_acc.items()) if not p.is_zero
    )

    delta = spec.perturbation.delta if spec.perturbation else None
    epsilon = remainder_exponent(spec.alpha, k, delta)
    t_star = transform.invertibility_threshold()

    # C with ||remainder(t)|| <= C * t^-(1+eps) for t >= t_star: each piece
    # decays at least as fast, so its constant is its coefficient norm shrunk
    # by t_star raised to the (nonnegative) exponent surplus.
    alpha = spec.alpha
    bound = 0.0
    for g, p in s_terms:
        surplus = g * alpha - 1 - epsilon
        bound += float(p.entry_norm()) * float(t_star) ** (-float(surplus))
    for j, p in w_terms:
        surplus = j * alpha - epsilon
        bound += float(p.entry_norm()) * float(t_star) ** (-float(surplus))
    u_bound = 0.0
    u_exponent = None
    if spec.perturbation:
        u_exponent = 1 + spec.perturbation.delta
        # ||U(t)|| = ||F(t) T(t)|| <= bound * (1 + 1/2) for t >= t_star
        u_bound = spec.perturbation.bound * 1.5
        bound += u_bound * float(t_star) ** (-float(spec.perturbation.delta - epsilon))

    remainder = RemainderBundle(
        s_terms=s_terms,
        w_terms=tuple(w_terms),
        u_exponent=u_exponent,
        u_bound=u_bound,
        epsilon=epsilon,
        bound_constant=bound,
    )
    return AveragedSystem(
        averaged=tuple(averaged),
        transform=transform,
        remainder=remainder,
        t_star=t_star,
    )


def transform_residuals(spec: SystemSpec, result: AveragedSystem,
                        t_samples: Sequence[float]) -> np.ndarray:
    """Frobenius norm of  L(t) T(t) - T'(t) - T(t) M(t)  at each sample.

    L is the input coefficient (without perturbation), T the transform and M
    the averaged principal part; the defining identity says this residual is
    exactly the remainder, so it must decay like t^-(1+epsilon).
    """
    alpha = float(spec.alpha)
    coeff_series = GradedOscSeries(
        spec.alpha, [TrigPolyMatrix.constant(spec.a0), *spec.grades]
    )
    d_osc, w_terms = result.transform.derivative()
    out = []
    for t in t_samples:
        lt = coeff_series.eval(t) @ result.transform.eval(t)
        tp = d_osc.eval(t)
        for j, p in w_terms:
            tp += t ** (-(1.0 + j * alpha)) * p.eval(t)
        tm = result.transform.eval(t) @ result.principal_part(t)
        out.append(np.linalg.norm(lt - tp - tm))
    return np.array(out)


def verify_transform_residual(spec: SystemSpec, result: AveragedSystem,
                              t_samples: Sequence[float]) -> float:
    """Max over samples of ||residual(t)|| * t^(1+epsilon); t >= t_star required."""
    t_star = result.t_star
    if any(t < t_star for t in t_samples):
        raise ValueError(f"samples must be >= t_star = {t_star}")
    eps = float(result.epsilon)
    res = transform_residuals(spec, result, t_samples)
    return float(max(r * t ** (1.0 + eps) for r, t in zip(res, t_samples)))
