"""Frontend for the adiabatic oscillator  y'' + (1 + t^-alpha sin(lambda t)) y = 0.

The rotating change of variables

    y = x1 cos t + x2 sin t,     y' = -x1 sin t + x2 cos t

turns the equation into a first-order system  dx/dt = t^-alpha A(t) x  whose
coefficient A(t) is a real trigonometric-polynomial matrix on the frequencies
{lambda - 2, lambda, lambda + 2} and their negatives.  This module builds that
system, runs the averaging pipeline and the asymptotic predictor on it, tags
the exact resonances (|lambda| = 2, 1, 2/3) and maps predicted fundamental
matrices back to (y, y') samples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional

import numpy as np

from .averaging import AveragedSystem, SystemSpec, average_system
from .asymptotics import AsymptoticPrediction, GrowthClass, predict
from .trigpoly import (
    CQMatrix,
    Rational,
    TrigPolyMatrix,
    as_rational,
    mat_conj,
    mat_from,
    mat_zero,
)

# Complex-form coefficients of A(t): the (lambda+2), (lambda-2) and lambda
# terms; the negative frequencies carry the elementwise conjugates.
COEFF_PLUS2 = mat_from(
    [[Fraction(-1, 8), (0, Fraction(1, 8))], [(0, Fraction(1, 8)), Fraction(1, 8)]]
)
COEFF_MINUS2 = mat_from(
    [[Fraction(1, 8), (0, Fraction(1, 8))], [(0, Fraction(1, 8)), Fraction(-1, 8)]]
)
COEFF_BASE = mat_from(
    [[0, (0, Fraction(-1, 4))], [(0, Fraction(1, 4)), 0]]
)


def oscillatory_coefficient(lam) -> TrigPolyMatrix:
    """The real trig-polynomial matrix A(t) of the rotated oscillator system."""
    lam = as_rational(lam)
    pieces = [
        (lam + 2, COEFF_PLUS2),
        (-(lam + 2), mat_conj(COEFF_PLUS2)),
        (lam - 2, COEFF_MINUS2),
        (-(lam - 2), mat_conj(COEFF_MINUS2)),
        (lam, COEFF_BASE),
        (-lam, mat_conj(COEFF_BASE)),
    ]
    return TrigPolyMatrix.from_terms(2, pieces)


def build_oscillator_system(lam, alpha) -> SystemSpec:
    """System spec for the rotated oscillator: a0 = 0, grade 1 = A(t).

    Higher grades (up to the k fixed by alpha) are zero polynomials.
    """
    lam = as_rational(lam)
    alpha = as_rational(alpha)
    if lam == 0:
        raise ValueError("lambda must be nonzero")
    from .averaging import choose_k

    k, _ = choose_k(alpha)
    grades = [oscillatory_coefficient(lam)]
    grades += [TrigPolyMatrix.zero(2) for _ in range(k - 1)]
    return SystemSpec(a0=mat_zero(2), alpha=alpha, grades=tuple(grades), real=True)


def closed_form_second_grade(lam) -> CQMatrix:
    """Closed form of the second averaged grade for nonresonant lambda.

    Valid for lambda not in {0, +-1, +-2}:  1/(4*(lambda^2-4)) * [[0,1],[-1,0]].
    """
    lam = as_rational(lam)
    if lam in (0, 1, -1, 2, -2):
        raise ValueError("closed form only applies to nonresonant lambda")
    g = 1 / (4 * (lam * lam - 4))
    return mat_from([[0, g], [-g, 0]])


def resonance_tag(lam) -> str:
    lam = as_rational(lam)
    if abs(lam) == 2:
        return "resonant_2"
    if abs(lam) == 1:
        return "resonant_1"
    if abs(lam) == Fraction(2, 3):
        return "resonant_2_3"
    return "nonresonant"


@dataclass(frozen=True)
class OscillatorConstants:
    """Named constants of the worked cases, attached only where they apply.

    * ``rho``/``beta``: envelope exponent sqrt(5)/24 and phase shift
      arctan(sqrt 5) of the |lambda| = 1 resonance (1/3 < alpha <= 1/2);
    * ``gamma``: log-phase drift 1/(4(lambda^2-4)) of nonresonant runs at
      alpha = 1/2;
    * ``phi_coefficient``: the sqrt(t) coefficient 1/2 of the |lambda| = 2
      resonance at alpha = 1/2.
    """

    rho: Optional[float] = None
    beta: Optional[float] = None
    gamma: Optional[Rational] = None
    phi_coefficient: Optional[Rational] = None


@dataclass(frozen=True)
class SolutionForm:
    """Machine-comparable description of one fundamental mode.

    Envelope kinds mirror :class:`~oscavg.asymptotics.GrowthClass`; the phase
    is  t + shift + drift, with drift either absent, ``rate*ln t`` or
    ``rate * t^exponent / exponent``.
    """

    envelope_kind: str
    envelope_rate: Optional[float]
    envelope_exponent: Optional[Rational]
    phase_shift: float
    drift_kind: str
    drift_rate: Optional[float]
    drift_exponent: Optional[Rational]


@dataclass(frozen=True)
class OscillatorCase:
    lam: Rational
    alpha: Rational
    resonance_tag: str
    system: SystemSpec
    averaged: AveragedSystem
    prediction: AsymptoticPrediction
    solution_forms: tuple
    constants: OscillatorConstants


def _constants_for(lam: Fraction, alpha: Fraction) -> OscillatorConstants:
    half, third = Fraction(1, 2), Fraction(1, 3)
    rho = beta = gamma = phi = None
    if abs(lam) == 1 and third < alpha <= half:
        rho = math.sqrt(5.0) / 24.0
        beta = math.atan(math.sqrt(5.0))
    if resonance_tag(lam) in ("nonresonant", "resonant_2_3") and alpha == half:
        gamma = 1 / (4 * (lam * lam - 4))
    if abs(lam) == 2 and alpha == half:
        phi = Fraction(1, 2)
    return OscillatorConstants(rho=rho, beta=beta, gamma=gamma, phi_coefficient=phi)


def _solution_forms(prediction: AsymptoticPrediction,
                    constants: OscillatorConstants) -> tuple:
    forms = []
    for mode, g in enumerate(prediction.growth):
        shift = 0.0
        if constants.beta is not None and g.rate is not None:
            shift = -constants.beta if g.rate > 0 else constants.beta
        if g.kind == "polynomial":
            forms.append(
                SolutionForm("polynomial", g.rate, None, shift, "none", None, None)
            )
        elif g.kind == "stretched_exponential":
            forms.append(
                SolutionForm(
                    "stretched_exponential", g.rate, g.exponent, shift,
                    "none", None, None,
                )
            )
        elif g.kind == "log_phase":
            forms.append(
                SolutionForm("bounded", None, None, 0.0, "log", g.rate, None)
            )
        elif g.converging:
            forms.append(
                SolutionForm("bounded", None, None, 0.0, "none", None, None)
            )
        else:
            # bounded with oscillatory phase: drift follows the imaginary part
            la = prediction.leading_index * prediction.alpha
            rate = float(prediction.eigenvalues[mode].imag)
            forms.append(
                SolutionForm(
                    "bounded", None, None, 0.0, "power", rate, 1 - la
                )
            )
    return tuple(forms)


def analyze_case(lam, alpha) -> OscillatorCase:
    """Full pipeline for one (lambda, alpha) pair of the oscillator."""
    lam = as_rational(lam)
    alpha = as_rational(alpha)
    system = build_oscillator_system(lam, alpha)
    averaged = average_system(system)
    prediction = predict(averaged)
    constants = _constants_for(lam, alpha)
    return OscillatorCase(
        lam=lam,
        alpha=alpha,
        resonance_tag=resonance_tag(lam),
        system=system,
        averaged=averaged,
        prediction=prediction,
        solution_forms=_solution_forms(prediction, constants),
        constants=constants,
    )


def rotation_matrix(t: float) -> np.ndarray:
    """The change of variables as a matrix: (y, y') = R(t) (x1, x2)."""
    c, s = math.cos(t), math.sin(t)
    return np.array([[c, s], [-s, c]])


def back_transform_state(x1: float, x2: float, t: float):
    """Map one x-space state to (y, y'); an exact rotation, norm-preserving."""
    c, s = math.cos(t), math.sin(t)
    return x1 * c + x2 * s, -x1 * s + x2 * c


def back_transform(prediction: AsymptoticPrediction, t: float) -> np.ndarray:
    """Predicted fundamental matrix in (y, y') variables at time t.

    Rows are (y_1, y_2) and (y'_1, y'_2); columns are the fundamental modes.
    """
    x = prediction.fundamental_matrix(t)
    return rotation_matrix(t) @ x


def equation_coefficient(lam, alpha) -> Callable[[float], np.ndarray]:
    """Coefficient matrix of the oscillator as a first-order (y, y') system."""
    lam_f, alpha_f = float(as_rational(lam)), float(as_rational(alpha))

    def coeff(t: float) -> np.ndarray:
        p = 1.0 + math.sin(lam_f * t) * t ** (-alpha_f)
        return np.array([[0.0, 1.0], [-p, 0.0]])

    return coeff
