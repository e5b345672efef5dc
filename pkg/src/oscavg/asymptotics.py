"""Asymptotic form of fundamental matrices of averaged systems.

Once the principal part is  sum_j t^(-j*alpha) A_j  with constant matrices,
the fundamental matrix behaves like  (P + o(1)) * exp(integral of Lambda(s) ds)
where P collects the eigenvectors of the first nonzero A_l and Lambda(t) is
the diagonal of eigenvalue curves of  sum_{j>=l} t^(-j*alpha) A_j.  This
module builds that prediction: eigen-decomposition of the leading matrix,
continuity-tracked eigenvalue curves, per-mode phase integrals (closed form
for single-grade systems, adaptive quadrature otherwise) and a growth class
per mode.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .averaging import AveragedSystem
from .errors import CurveTrackingError, RepeatedEigenvaluesError
from .trigpoly import CQMatrix, Rational, mat_is_zero, mat_to_numpy


def leading_index(averaged: Sequence[CQMatrix]) -> Optional[int]:
    """Index of the first nonzero averaged matrix, or None when all vanish."""
    for j, m in enumerate(averaged):
        if not mat_is_zero(m):
            return j
    return None


def _canonical_eigen(matrix: np.ndarray):
    """Eigen-decomposition with a deterministic order and vector phase."""
    eigvals, eigvecs = np.linalg.eig(matrix)
    order = np.lexsort((eigvals.imag, eigvals.real))
    eigvals = eigvals[order]
    eigvecs = eigvecs[:, order]
    for i in range(eigvecs.shape[1]):
        col = eigvecs[:, i]
        pivot = np.argmax(np.abs(col))
        phase = col[pivot] / abs(col[pivot])
        col = col / phase
        eigvecs[:, i] = col / np.linalg.norm(col)
    return eigvals, eigvecs


def eigen_decompose_leading(a_l: np.ndarray, tol: float = 1e-8):
    """Eigenvalues (deterministic order) and eigenvector matrix of A_l.

    Rejects matrices whose smallest pairwise eigenvalue gap falls below
    ``tol * ||A_l||``: the asymptotic form assumes distinct eigenvalues, and
    near-collisions make the eigenvector matrix meaningless.
    """
    a_l = np.asarray(a_l, dtype=complex)
    if not a_l.any():
        raise ValueError("leading matrix must be nonzero")
    eigvals, eigvecs = _canonical_eigen(a_l)
    scale = np.linalg.norm(a_l, 2)
    n = len(eigvals)
    min_gap = math.inf
    pair = (0, 0)
    for i in range(n):
        for j in range(i + 1, n):
            gap = abs(eigvals[i] - eigvals[j])
            if gap < min_gap:
                min_gap = gap
                pair = (i, j)
    if n > 1 and min_gap < tol * scale:
        raise RepeatedEigenvaluesError(
            f"leading matrix eigenvalues {eigvals[pair[0]]:.6g} and "
            f"{eigvals[pair[1]]:.6g} are separated by {min_gap:.3g} "
            f"< {tol:g} * ||A_l|| = {tol * scale:.3g}"
        )
    return eigvals, eigvecs


def _match(values: np.ndarray, reference: np.ndarray, radius: float):
    """Order ``values`` so entry i is the unique value within ``radius`` of
    reference[i]; returns None when the assignment is ambiguous."""
    n = len(reference)
    used = [False] * n
    out = np.empty(n, dtype=complex)
    for i, ref in enumerate(reference):
        dists = np.abs(values - ref)
        j = int(np.argmin(dists))
        if used[j] or dists[j] > radius:
            return None
        used[j] = True
        out[i] = values[j]
    return out


class EigenvalueCurves:
    """Continuity-tracked eigenvalue curves of  sum_{j>=l} t^(-j*alpha) A_j.

    Far from t_star the scaled matrix t^(l*alpha) * sum(...) is a small
    perturbation of A_l, so eigenvalues are matched directly to the
    eigenvalues of A_l.  Closer in, orderings are chained anchor to anchor
    with nearest-neighbour matching; ambiguous steps are halved until the
    jump fits inside the local matching radius.
    """

    def __init__(self, averaged_float: Sequence[np.ndarray], alpha: float,
                 l: int, t_star: float, distinct_tol: float = 1e-8):
        self.alpha = float(alpha)
        self.l = l
        self.t_star = float(t_star)
        self.matrices = [np.asarray(m, dtype=complex) for m in averaged_float]
        self.ref_eigs, self.p_matrix = eigen_decompose_leading(
            self.matrices[l], tol=distinct_tol
        )
        self.gap = (
            min(
                abs(a - b)
                for i, a in enumerate(self.ref_eigs)
                for b in self.ref_eigs[i + 1:]
            )
            if len(self.ref_eigs) > 1
            else math.inf
        )
        self.cond = float(np.linalg.cond(self.p_matrix))
        self._anchors: list = []  # sorted (t, scaled ordered eigs)
        self.t_direct = self._find_direct_threshold()

    # -- internals -----------------------------------------------------------

    def _tail_bound(self, t: float) -> float:
        return sum(
            np.linalg.norm(m, 2) * t ** (-(j - self.l) * self.alpha)
            for j, m in enumerate(self.matrices)
            if j > self.l and m.any()
        )

    def _find_direct_threshold(self) -> float:
        if len(self.ref_eigs) == 1 or self._tail_bound(self.t_star) == 0.0:
            return self.t_star
        t = self.t_star
        for _ in range(400):
            if self.cond * self._tail_bound(t) <= self.gap / 4:
                return t
            t *= 2.0
        raise CurveTrackingError("eigenvalue curves never separate cleanly")

    def _scaled_matrix(self, t: float) -> np.ndarray:
        out = np.zeros_like(self.matrices[self.l])
        for j, m in enumerate(self.matrices):
            if j < self.l or not m.any():
                continue
            out += t ** (-(j - self.l) * self.alpha) * m
        return out

    def _scaled_direct(self, t: float) -> np.ndarray:
        eigs = np.linalg.eigvals(self._scaled_matrix(t))
        matched = _match(eigs, self.ref_eigs, self.gap / 2 if self.gap < math.inf else math.inf)
        if matched is None:
            raise CurveTrackingError(
                f"direct eigenvalue matching ambiguous at t={t:g}"
            )
        return matched

    def _nearest_anchor(self, t: float):
        best = None
        for ta, vals in self._anchors:
            d = abs(math.log(ta) - math.log(t))
            if best is None or d < best[0]:
                best = (d, ta, vals)
        return best

    def _step(self, t_from: float, vals_from: np.ndarray, t_to: float) -> np.ndarray:
        """Walk from an ordered sample to t_to, halving on ambiguity."""
        t_cur, vals = t_from, vals_from
        guard = 0
        while t_cur != t_to:
            ratio = t_to / t_cur
            step = min(2.0, max(0.5, ratio))
            t_next = t_cur * step
            if (step > 1.0) != (ratio > 1.0) or abs(math.log(ratio)) <= math.log(2.0):
                t_next = t_to
            while True:
                eigs = np.linalg.eigvals(self._scaled_matrix(t_next))
                if len(vals) > 1:
                    local_gap = min(
                        abs(a - b)
                        for i, a in enumerate(vals)
                        for b in vals[i + 1:]
                    )
                else:
                    local_gap = math.inf
                matched = _match(eigs, vals, local_gap / 2)
                if matched is not None:
                    break
                # ambiguous: halve the (logarithmic) step
                t_next = math.sqrt(t_cur * t_next)
                guard += 1
                if guard > 200 or abs(math.log(t_next / t_cur)) < 1e-9:
                    raise CurveTrackingError(
                        f"eigenvalue continuity matching stayed ambiguous near t={t_cur:g}"
                    )
            t_cur, vals = t_next, matched
            self._anchors.append((t_cur, vals))
            guard += 1
            if guard > 10000:
                raise CurveTrackingError("eigenvalue tracking did not converge")
        return vals

    # -- queries --------------------------------------------------------------

    def scaled_values(self, t: float) -> np.ndarray:
        """Eigenvalues of t^(l*alpha) * sum_{j>=l} t^(-j*alpha) A_j, in curve order."""
        if t >= self.t_direct:
            return self._scaled_direct(t)
        nearest = self._nearest_anchor(t)
        if nearest is None:
            start_t = self.t_direct
            start_vals = self._scaled_direct(start_t)
            self._anchors.append((start_t, start_vals))
        else:
            _, start_t, start_vals = nearest
        if start_t == t:
            return start_vals
        return self._step(start_t, start_vals, t)

    def values(self, t: float, prev: Optional[np.ndarray] = None) -> np.ndarray:
        """Eigenvalue curves at time t, ordered by continuity.

        When ``prev`` (the previous sample's values) is given, ordering is by
        nearest-neighbour matching against it; otherwise the canonical curve
        order anchored at the leading matrix is used.
        """
        scale = t ** (-self.l * self.alpha)
        if prev is not None:
            eigs = np.linalg.eigvals(self._scaled_matrix(t)) * scale
            prev = np.asarray(prev, dtype=complex)
            if len(prev) > 1:
                local_gap = min(
                    abs(a - b) for i, a in enumerate(prev) for b in prev[i + 1:]
                )
            else:
                local_gap = math.inf
            matched = _match(eigs, prev, local_gap / 2)
            if matched is None:
                raise CurveTrackingError(
                    f"matching against previous sample ambiguous at t={t:g}; "
                    "sample more densely"
                )
            return matched
        return self.scaled_values(t) * scale


def lambda_curves(averaged_float: Sequence[np.ndarray], alpha, l: int,
                  t: float, prev: Optional[np.ndarray] = None,
                  t_star: float = 1.0) -> np.ndarray:
    """One-shot eigenvalue-curve query (see :class:`EigenvalueCurves`)."""
    tracker = EigenvalueCurves(averaged_float, float(alpha), l, t_star)
    return tracker.values(t, prev=prev)


def _adaptive_simpson(f, a: float, b: float, tol: float, depth: int = 60):
    """Adaptive Simpson rule for vector-valued integrands."""
    fa, fm, fb = f(a), f((a + b) / 2), f(b)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)

    def recurse(a, b, fa, fm, fb, whole, tol, depth):
        m = (a + b) / 2
        lm, rm = (a + m) / 2, (m + b) / 2
        flm, frm = f(lm), f(rm)
        left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
        right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
        err = np.max(np.abs(left + right - whole))
        if err < 15.0 * tol or depth <= 0:
            return left + right + (left + right - whole) / 15.0
        return recurse(a, m, fa, flm, fm, left, tol / 2, depth - 1) + recurse(
            m, b, fm, frm, fb, right, tol / 2, depth - 1
        )

    return recurse(a, b, fa, fm, fb, whole, tol, depth)


@dataclass(frozen=True)
class GrowthClass:
    """Per-mode growth classification of the predicted envelope.

    kinds: ``bounded`` (optionally with a converging fundamental matrix),
    ``decaying``, ``polynomial`` (envelope t^rate), ``stretched_exponential``
    (envelope exp(rate * t^exponent / exponent)) and ``log_phase`` (bounded
    envelope with phase drift rate*ln t).
    """

    kind: str
    rate: Optional[float] = None
    exponent: Optional[Rational] = None
    converging: bool = False

    def describe(self) -> str:
        if self.kind == "polynomial":
            return f"polynomial t^({self.rate:.6g})"
        if self.kind == "stretched_exponential":
            return (
                f"exp({self.rate:.6g} * t^({self.exponent}) / ({self.exponent}))"
            )
        if self.kind == "log_phase":
            return f"bounded, phase drift {self.rate:.6g}*ln(t)"
        if self.kind == "bounded" and self.converging:
            return "bounded, converging fundamental matrix I + o(1)"
        return self.kind


def classify_remainder_dominated(epsilon) -> GrowthClass:
    """All averaged matrices vanish: an integrable remainder is all that is
    left, so solutions converge to constants regardless of epsilon's value."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    return GrowthClass(kind="bounded", converging=True)


@dataclass
class AsymptoticPrediction:
    """Leading-order fundamental-matrix prediction for an averaged system.

    Exposes the eigenvector matrix of the first nonzero averaged grade, the
    tracked eigenvalue curves, per-mode phase integrals from t_star and a
    growth class per mode.  The o(1) correction factor is not computable from
    the averaged data; only the leading envelope and phase are predicted.
    """

    leading_index: Optional[int]
    alpha: Rational
    t_star: float
    epsilon: Rational
    eigenvalues: np.ndarray
    p_matrix: np.ndarray
    growth: tuple
    single_grade: bool
    tracker: Optional[EigenvalueCurves] = field(repr=False, default=None)

    @property
    def remainder_dominated(self) -> bool:
        return self.leading_index is None

    def lambda_curves(self, t: float, prev: Optional[np.ndarray] = None) -> np.ndarray:
        if self.remainder_dominated:
            return np.zeros(len(self.eigenvalues), dtype=complex)
        return self.tracker.values(t, prev=prev)

    def _closed_form_factor(self, t: float) -> float:
        """Integral of s^(-l*alpha) from t_star to t."""
        la = float(self.leading_index * self.alpha)
        if la == 1.0:
            return math.log(t / self.t_star)
        return (t ** (1.0 - la) - self.t_star ** (1.0 - la)) / (1.0 - la)

    def closed_form_leading_phase(self, t: float) -> np.ndarray:
        """Per-mode integral of mu_i * s^(-l*alpha), the leading phase term."""
        if self.remainder_dominated:
            return np.zeros(len(self.eigenvalues), dtype=complex)
        return self.eigenvalues * self._closed_form_factor(t)

    def phase(self, t: float, force_quadrature: bool = False) -> np.ndarray:
        """Per-mode integral of Lambda_ii(s) ds from t_star to t.

        Closed form when the averaged system has a single nonzero grade;
        adaptive quadrature on the tracked curves otherwise (relative accuracy
        about 1e-8 on the log-time axis).
        """
        if self.remainder_dominated:
            return np.zeros(len(self.eigenvalues), dtype=complex)
        if t < self.t_star:
            raise ValueError(f"phase is integrated from t_star = {self.t_star}")
        if t == self.t_star:
            return np.zeros(len(self.eigenvalues), dtype=complex)
        if self.single_grade and not force_quadrature:
            return self.closed_form_leading_phase(t)

        def integrand(u: float) -> np.ndarray:
            s = math.exp(u)
            return self.tracker.values(s) * s  # ds = s du

        coarse = abs(
            self.eigenvalues * self._closed_form_factor(t)
        ).max()
        tol = 1e-9 * (1.0 + coarse)
        return _adaptive_simpson(
            integrand, math.log(self.t_star), math.log(t), tol
        )

    def fundamental_matrix(self, t: float, force_quadrature: bool = False) -> np.ndarray:
        """Leading form P * diag(exp(phase_i(t))) of the fundamental matrix."""
        if self.remainder_dominated:
            return np.eye(len(self.eigenvalues), dtype=complex)
        return self.p_matrix @ np.diag(np.exp(self.phase(t, force_quadrature)))


def classify_growth(prediction: AsymptoticPrediction) -> tuple:
    """Growth class per mode from the real part of the leading eigenvalue.

    With l*alpha = 1 a nonzero real part gives polynomial growth t^Re(mu);
    with l*alpha < 1 it gives a stretched exponential.  Zero real parts are
    checked along the full tracked curves: if the real part vanishes (or
    decays integrably) the mode is bounded.
    """
    if prediction.remainder_dominated:
        return tuple(
            classify_remainder_dominated(prediction.epsilon)
            for _ in prediction.eigenvalues
        )
    la = prediction.leading_index * prediction.alpha
    scale = max(abs(prediction.eigenvalues))
    out = []
    for i, mu in enumerate(prediction.eigenvalues):
        re = mu.real
        if abs(re) > 1e-12 * scale:
            if la == 1:
                out.append(GrowthClass(kind="polynomial", rate=float(re)))
            else:
                out.append(
                    GrowthClass(
                        kind="stretched_exponential",
                        rate=float(re),
                        exponent=1 - la,
                    )
                )
            continue
        if la == 1:
            out.append(GrowthClass(kind="log_phase", rate=float(mu.imag)))
            continue
        # leading real part vanishes: inspect the full curve
        ts = np.geomspace(max(prediction.t_star, 2.0), 1e6, 25)
        worst = 0.0
        for t in ts:
            lam = prediction.lambda_curves(t)[i]
            worst = max(worst, abs(lam.real) * t)
        if worst < 1e-10 * (1.0 + scale):
            out.append(GrowthClass(kind="bounded"))
        else:
            # real part behaves like c/t at worst: polynomial envelope t^c
            t_hi = ts[-1]
            c = prediction.lambda_curves(t_hi)[i].real * t_hi
            kind = "polynomial" if abs(c) > 1e-10 else "bounded"
            out.append(GrowthClass(kind=kind, rate=float(c)))
    return tuple(out)


def predict(avg: AveragedSystem, distinct_tol: float = 1e-8) -> AsymptoticPrediction:
    """Build the asymptotic prediction for an averaged system."""
    l = leading_index(avg.averaged)
    n = avg.transform.dim
    alpha = avg.transform.alpha
    if l is None:
        pred = AsymptoticPrediction(
            leading_index=None,
            alpha=alpha,
            t_star=float(avg.t_star),
            epsilon=avg.epsilon,
            eigenvalues=np.zeros(n, dtype=complex),
            p_matrix=np.eye(n, dtype=complex),
            growth=(),
            single_grade=True,
            tracker=None,
        )
        pred.growth = classify_growth(pred)
        return pred
    averaged_f = avg.averaged_float()
    tracker = EigenvalueCurves(
        averaged_f, float(alpha), l, float(avg.t_star), distinct_tol=distinct_tol
    )
    single = all(
        j == l or not averaged_f[j].any() for j in range(len(averaged_f))
    )
    pred = AsymptoticPrediction(
        leading_index=l,
        alpha=alpha,
        t_star=float(avg.t_star),
        epsilon=avg.epsilon,
        eigenvalues=tracker.ref_eigs,
        p_matrix=tracker.p_matrix,
        growth=(),
        single_grade=single,
        tracker=tracker,
    )
    pred.growth = classify_growth(pred)
    return pred
