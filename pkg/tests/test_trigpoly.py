"""Exact trig-polynomial algebra: identities, oracles, closure properties."""

import random
from fractions import Fraction as F

import numpy as np
import pytest

from oscavg.trigpoly import (
    ComplexRational,
    TrigPolyMatrix,
    cq,
    mat_from,
    mat_identity,
    mat_to_numpy,
)


def random_poly(rng, dim=2, n_terms=3, real_valued=False, include_mean=True):
    """Random polynomial on the lattice {n/6 : |n| <= 18} with small coefficients."""
    terms = []
    for _ in range(n_terms):
        freq = F(rng.randint(-18, 18), 6)
        if not include_mean and freq == 0:
            freq += F(1, 6)
        m = [
            [
                ComplexRational(F(rng.randint(-4, 4), rng.randint(1, 3)),
                                F(rng.randint(-4, 4), rng.randint(1, 3)))
                for _ in range(dim)
            ]
            for _ in range(dim)
        ]
        terms.append((freq, m))
    p = TrigPolyMatrix.from_terms(dim, terms)
    if real_valued:
        p = p + p.conjugate()
    return p


def test_add_identity_and_cancellation():
    rng = random.Random(1)
    p = random_poly(rng)
    zero = TrigPolyMatrix.zero(2)
    assert p + zero == p
    assert (p + (-p)).is_zero


def test_add_merges_same_frequency():
    m = [[1, 0], [0, 1]]
    n = [[0, 2], [3, 0]]
    p = TrigPolyMatrix.single(1, m) + TrigPolyMatrix.single(1, n)
    assert p.frequencies == (F(1),)
    assert p.coefficient(1) == mat_from([[1, 2], [3, 1]])


def test_add_dimension_mismatch():
    with pytest.raises(ValueError, match="dimension"):
        TrigPolyMatrix.zero(2) + TrigPolyMatrix.zero(3)


def test_mul_frequency_cancellation():
    m = mat_from([[1, 2], [0, 1]])
    n = mat_from([[1, 0], [1, 1]])
    p = TrigPolyMatrix.single(F(3, 2), m) @ TrigPolyMatrix.single(F(-3, 2), n)
    assert p.frequencies == (F(0),)
    assert p.coefficient(0) == mat_from([[3, 2], [1, 1]])


def test_mul_matches_pointwise_evaluation():
    rng = random.Random(7)
    for _ in range(10):
        p = random_poly(rng, n_terms=1)
        q = random_poly(rng, n_terms=1)
        prod = p @ q
        for t in (0.3, 1.7, 9.1):
            direct = p.eval(t) @ q.eval(t)
            assert np.max(np.abs(prod.eval(t) - direct)) < 1e-12


def test_mul_frequency_sumset():
    rng = random.Random(3)
    p = random_poly(rng)
    q = random_poly(rng)
    sumset = {f1 + f2 for f1 in p.frequencies for f2 in q.frequencies}
    assert set((p @ q).frequencies) <= sumset


def test_mean_of_zero_frequency_free_poly_is_zero():
    p = TrigPolyMatrix.single(F(1, 3), [[1, 0], [0, 1]])
    assert all(entry.is_zero for row in p.mean() for entry in row)


def test_mean_of_constant():
    m = mat_from([[2, 0], [0, 2]])
    assert TrigPolyMatrix.constant(m).mean() == m


def test_derivative_single_term():
    m = [[1, 0], [0, 2]]
    p = TrigPolyMatrix.single(F(5, 2), m)
    d = p.derivative()
    assert d.frequencies == (F(5, 2),)
    expected = [[cq((0, F(5, 2))), cq(0)], [cq(0), cq((0, 5))]]
    assert d.coefficient(F(5, 2)) == tuple(tuple(r) for r in expected)


def test_derivative_of_constant_is_empty():
    assert TrigPolyMatrix.identity(3).derivative().is_zero


def test_derivative_matches_finite_difference():
    rng = random.Random(11)
    p = random_poly(rng, n_terms=4)
    t, h = 2.0, 1e-6
    fd = (p.eval(t + h) - p.eval(t - h)) / (2 * h)
    d = p.derivative().eval(t)
    scale = max(1.0, np.max(np.abs(d)))
    assert np.max(np.abs(d - fd)) / scale < 1e-6


def test_eval_empty_and_at_zero():
    assert np.all(TrigPolyMatrix.zero(2).eval(3.7) == 0)
    m = [[1, 2], [3, 4]]
    p = TrigPolyMatrix.single(F(7, 3), m)
    assert np.max(np.abs(p.eval(0.0) - mat_to_numpy(mat_from(m)))) < 1e-15


def test_real_valued_eval_has_tiny_imaginary_part():
    rng = random.Random(23)
    p = random_poly(rng, real_valued=True)
    assert p.is_real_valued()
    for t in (0.5, 4.0, 100.0):
        assert np.max(np.abs(p.eval(t).imag)) < 1e-12


class TestInvariants:
    def test_evaluation_homomorphism(self):
        rng = random.Random(5)
        for _ in range(8):
            p = random_poly(rng)
            q = random_poly(rng)
            prod = p @ q
            for t in (0.2, 3.1, 17.0):
                lhs = prod.eval(t)
                rhs = p.eval(t) @ q.eval(t)
                scale = max(1.0, np.max(np.abs(rhs)))
                assert np.max(np.abs(lhs - rhs)) / scale < 1e-12

    def test_realness_closure(self):
        rng = random.Random(9)
        for _ in range(10):
            p = random_poly(rng, real_valued=True)
            q = random_poly(rng, real_valued=True)
            assert (p + q).is_real_valued()
            assert (p @ q).is_real_valued()
            assert p.derivative().is_real_valued()

    def test_mean_of_derivative_is_zero(self):
        rng = random.Random(13)
        for _ in range(10):
            p = random_poly(rng, n_terms=5)
            mean = p.derivative().mean()
            assert all(entry.is_zero for row in mean for entry in row)

    def test_resonance_detection_is_exact(self):
        # 1/3 + 1/6 - 1/2 == 0 exactly on the rational lattice
        a = TrigPolyMatrix.single(F(1, 3), mat_identity(2))
        b = TrigPolyMatrix.single(F(1, 6), mat_identity(2))
        c = TrigPolyMatrix.single(F(-1, 2), mat_identity(2))
        prod = (a @ b) @ c
        assert prod.frequencies == (F(0),)
        # while a float-close frequency stays off the mean slot
        d = TrigPolyMatrix.single(F(-499999, 1000000), mat_identity(2))
        assert F(0) not in ((a @ b) @ d).frequencies


def test_complex_rational_division():
    x = cq((F(1, 2), F(1, 3)))
    y = cq((F(-2, 5), F(7)))
    assert (x / y) * y == x
    with pytest.raises(ZeroDivisionError):
        x / cq(0)


def test_no_zero_terms_stored():
    p = TrigPolyMatrix.from_terms(
        2, [(F(1), [[1, 0], [0, 0]]), (F(1), [[-1, 0], [0, 0]])]
    )
    assert p.is_zero and p.terms == ()
