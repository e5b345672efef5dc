"""Graded oscillatory series: products, derivatives, invertibility threshold."""

import random
from fractions import Fraction as F

import numpy as np
import pytest

from oscavg.series import GradedOscSeries, remainder_exponent
from oscavg.trigpoly import TrigPolyMatrix, mat_from

from test_trigpoly import random_poly


def test_identity_series_is_neutral():
    rng = random.Random(2)
    y1 = random_poly(rng)
    x = GradedOscSeries(F(1, 2), [TrigPolyMatrix.identity(2), y1])
    ident = GradedOscSeries(F(1, 2), [TrigPolyMatrix.identity(2), TrigPolyMatrix.zero(2)])
    prod, overflow = ident.mul(x, cutoff=1)
    assert prod == x
    assert overflow == []


def test_binomial_product_with_overflow():
    rng = random.Random(4)
    y1 = random_poly(rng)
    z1 = random_poly(rng)
    ident = TrigPolyMatrix.identity(2)
    a = GradedOscSeries(F(1, 3), [ident, y1])
    b = GradedOscSeries(F(1, 3), [ident, z1])
    prod, overflow = a.mul(b, cutoff=1)
    assert prod.grades[0] == ident
    assert prod.grades[1] == y1 + z1
    assert len(overflow) == 1
    grade, poly = overflow[0]
    assert grade == 2 and poly == y1 @ z1


def test_product_evaluation_matches_with_overflow_bound():
    rng = random.Random(6)
    alpha = F(1, 2)
    x = GradedOscSeries(alpha, [TrigPolyMatrix.identity(2),
                                random_poly(rng), random_poly(rng)])
    y = GradedOscSeries(alpha, [TrigPolyMatrix.identity(2),
                                random_poly(rng), random_poly(rng)])
    prod, overflow = x.mul(y, cutoff=2)
    t = 50.0
    direct = x.eval(t) @ y.eval(t)
    truncated = prod.eval(t)
    # difference is exactly the evaluated overflow ...
    tail = sum(t ** (-g * 0.5) * p.eval(t) for g, p in overflow)
    assert np.max(np.abs(direct - truncated - tail)) < 1e-12
    # ... and bounded by the coefficient norms times t^(-3/2)
    bound = sum(float(p.entry_norm()) * t ** (-(g - 3) * 0.5) for g, p in overflow)
    assert np.max(np.abs(direct - truncated)) <= bound * t ** -1.5 + 1e-12


def test_alpha_and_dim_mismatch():
    a = GradedOscSeries.identity(2, F(1, 2))
    with pytest.raises(ValueError, match="alpha"):
        a.mul(GradedOscSeries.identity(2, F(1, 3)), cutoff=1)
    with pytest.raises(ValueError, match="dimension"):
        a.mul(GradedOscSeries.identity(3, F(1, 2)), cutoff=1)


def test_derivative_of_constant_grades():
    a1 = TrigPolyMatrix.constant([[1, 2], [3, 4]])
    a2 = TrigPolyMatrix.constant([[0, 1], [1, 0]])
    x = GradedOscSeries(F(1, 2), [TrigPolyMatrix.identity(2), a1, a2])
    osc, power = x.derivative()
    assert all(g.is_zero for g in osc.grades)
    assert [(j, p) for j, p in power] == [
        (1, a1.scale(-F(1, 2))),
        (2, a2.scale(-1)),
    ]


def test_derivative_of_identity_only():
    x = GradedOscSeries.identity(2, F(1, 2))
    osc, power = x.derivative()
    assert all(g.is_zero for g in osc.grades)
    assert power == []


def test_derivative_matches_finite_difference():
    rng = random.Random(8)
    x = GradedOscSeries(F(1, 3), [random_poly(rng), random_poly(rng), random_poly(rng)])
    t, h = 100.0, 1e-4
    fd = (x.eval(t + h) - x.eval(t - h)) / (2 * h)
    osc, power = x.derivative()
    analytic = osc.eval(t) + sum(
        t ** (-(1.0 + j / 3.0)) * p.eval(t) for j, p in power
    )
    scale = max(1.0, np.max(np.abs(analytic)))
    assert np.max(np.abs(analytic - fd)) / scale < 1e-6


def test_power_term_decay_bound():
    rng = random.Random(10)
    alpha = F(2, 5)
    x = GradedOscSeries(alpha, [TrigPolyMatrix.identity(2), random_poly(rng)])
    _, power = x.derivative()
    c = sum(float(p.entry_norm()) for _, p in power)
    for t in (10.0, 100.0, 1000.0):
        contribution = sum(
            t ** (-(1.0 + j * float(alpha))) * p.eval(t) for j, p in power
        )
        assert np.linalg.norm(contribution, 2) <= c * t ** (-(1.0 + float(alpha))) + 1e-14


def test_eval_identity_and_grade0_only():
    x = GradedOscSeries.identity(2, F(7, 8))
    assert np.max(np.abs(x.eval(3.0) - np.eye(2))) < 1e-15
    rng = random.Random(12)
    p = random_poly(rng)
    for alpha in (F(1, 4), F(1)):
        s = GradedOscSeries(alpha, [p])
        assert np.max(np.abs(s.eval(5.0) - p.eval(5.0))) < 1e-15


def test_eval_single_grade_scales():
    rng = random.Random(14)
    p = random_poly(rng)
    s = GradedOscSeries(F(1), [TrigPolyMatrix.zero(2), p])
    t = 10.0
    assert np.max(np.abs(s.eval(t) - p.eval(t) / 10.0)) < 1e-14


def test_eval_requires_positive_time():
    with pytest.raises(ValueError, match="t > 0"):
        GradedOscSeries.identity(2, F(1, 2)).eval(0.0)


class TestInvertibilityThreshold:
    def test_trivial_series(self):
        x = GradedOscSeries(F(1, 2), [TrigPolyMatrix.identity(2), TrigPolyMatrix.zero(2)])
        assert x.invertibility_threshold() == 1

    def test_norm_eight_alpha_half(self):
        # ||Y1|| = 8 and alpha = 1/2: need 8 * t^(-1/2) <= 1/2, so t* = 256
        y1 = TrigPolyMatrix.single(1, [[2, 2], [2, 2]])
        assert float(y1.entry_norm()) == 8.0
        x = GradedOscSeries(F(1, 2), [TrigPolyMatrix.identity(2), y1])
        assert x.invertibility_threshold() == 256

    def test_monotone_in_norm(self):
        for scale in (1, 2, 4, 8):
            y_small = TrigPolyMatrix.single(1, [[scale, 0], [0, scale]])
            y_big = TrigPolyMatrix.single(1, [[2 * scale, 0], [0, 2 * scale]])
            xs = GradedOscSeries(F(1, 3), [TrigPolyMatrix.identity(2), y_small])
            xb = GradedOscSeries(F(1, 3), [TrigPolyMatrix.identity(2), y_big])
            assert xb.invertibility_threshold() >= xs.invertibility_threshold()

    def test_requires_identity_grade0(self):
        x = GradedOscSeries(F(1, 2), [TrigPolyMatrix.constant([[2, 0], [0, 2]])])
        with pytest.raises(ValueError, match="identity"):
            x.invertibility_threshold()

    def test_neumann_bound_on_samples(self):
        rng = random.Random(16)
        x = GradedOscSeries(
            F(1, 2),
            [TrigPolyMatrix.identity(2), random_poly(rng, real_valued=True)],
        )
        t_star = x.invertibility_threshold()
        for t in (t_star, 2.0 * t_star, 10.0 * t_star, 1000.0 * t_star):
            smin = np.linalg.svd(x.eval(t), compute_uv=False)[-1]
            assert smin >= 0.5 - 1e-12


def test_remainder_exponent():
    assert remainder_exponent(F(1), 1) == 1
    assert remainder_exponent(F(1, 2), 2) == F(1, 2)
    assert remainder_exponent(F(1, 3), 3) == F(1, 3)
    assert remainder_exponent(F(1, 2), 2, delta=F(1, 4)) == F(1, 4)
    with pytest.raises(ValueError):
        remainder_exponent(F(1, 2), 1)  # (k+1)*alpha - 1 == 0
