"""Averaging-based asymptotic integration of linear ODE systems with
oscillatory decreasing coefficients, with an adiabatic-oscillator frontend
and a direct-integration oracle."""

from .trigpoly import (
    ComplexRational,
    Frequency,
    Rational,
    TrigPolyMatrix,
    as_rational,
    cq,
)
from .series import GradedOscSeries, RemainderBundle, remainder_exponent
from .averaging import (
    AveragedSystem,
    Perturbation,
    RotationRemoval,
    SystemSpec,
    average_system,
    averaging_step,
    choose_k,
    homological_residual,
    remove_rotation,
    solve_homological,
    solve_sylvester,
    transform_residuals,
    verify_transform_residual,
)
from .asymptotics import (
    AsymptoticPrediction,
    EigenvalueCurves,
    GrowthClass,
    classify_growth,
    classify_remainder_dominated,
    eigen_decompose_leading,
    lambda_curves,
    leading_index,
    predict,
)
from .oscillator import (
    OscillatorCase,
    OscillatorConstants,
    SolutionForm,
    analyze_case,
    back_transform,
    back_transform_state,
    build_oscillator_system,
    closed_form_second_grade,
    equation_coefficient,
    oscillatory_coefficient,
    resonance_tag,
)
from .oracle import (
    ComparisonVerdict,
    Envelope,
    IntegrationResult,
    OracleFit,
    PredictedTarget,
    amplitude_envelope,
    compare_prediction,
    fit_growth,
    fit_log_phase,
    integrate_oscillator,
    integrate_system,
    zero_crossings,
)

__version__ = "0.1.0"
