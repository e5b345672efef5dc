"""Independent numerical verification by direct integration.

A Dormand-Prince 5(4) embedded pair with PI step-size control propagates the
fundamental matrix of  X' = C(t) X  from the identity.  Amplitude envelopes
r(t) = ||column|| are extracted from the snapshots, growth models (polynomial,
stretched-exponential, bounded, log-phase drift) are fitted by least squares,
and fits are compared against pipeline predictions.  Nothing here reuses the
averaging machinery: this is the check on the other side of it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import InsufficientSpanError

# Dormand-Prince 5(4) tableau
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0)
_E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)

_MAX_FACTOR = 5.0
_MIN_FACTOR = 0.2
_SAFETY = 0.9
_KI = 0.7 / 5  # PI controller: integral gain
_KP = 0.4 / 5  # PI controller: proportional (previous-error) gain


@dataclass
class StepStats:
    n_accepted: int
    n_rejected: int
    n_rhs: int
    h_min: float
    h_max: float


@dataclass
class IntegrationResult:
    """Snapshots of a propagated fundamental matrix on a monotone time grid."""

    t: np.ndarray
    states: np.ndarray  # shape (len(t), n, n)
    rtol: float
    atol: float
    stats: StepStats

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    def determinants(self) -> np.ndarray:
        return np.array([np.linalg.det(s) for s in self.states])


def _prepare_samples(t0: float, t1: float, sample_times) -> np.ndarray:
    if sample_times is None:
        samples = np.array([t1], dtype=float)
    else:
        samples = np.asarray(sorted(float(s) for s in sample_times), dtype=float)
        slack = 1e-9 * max(1.0, abs(t0), abs(t1))
        if samples.size and (samples[0] < t0 - slack or samples[-1] > t1 + slack):
            raise ValueError("sample times must lie within [t0, t1]")
        samples = np.clip(samples, t0, t1)
    return samples


def integrate_system(coefficient: Callable[[float], np.ndarray], t0: float,
                     t1: float, rtol: float = 1e-8, atol: float = 1e-12,
                     sample_times: Optional[Sequence[float]] = None,
                     first_step: float = 1e-2,
                     max_steps: int = 100_000_000) -> IntegrationResult:
    """Propagate the fundamental matrix of X' = C(t) X from identity at t0.

    Snapshots are recorded exactly at ``sample_times`` (default: only t1) by
    clipping steps onto them.  Raises on step underflow or non-finite states.
    """
    if t1 <= t0:
        raise ValueError("need t1 > t0")
    if rtol <= 0 or atol <= 0:
        raise ValueError("tolerances must be positive")
    samples = _prepare_samples(t0, t1, sample_times)

    c0 = np.asarray(coefficient(t0))
    n = c0.shape[0]
    dtype = complex if np.iscomplexobj(c0) else float
    x = np.eye(n, dtype=dtype)

    out_t, out_x = [], []
    si = 0
    while si < samples.size and samples[si] <= t0:
        out_t.append(t0)
        out_x.append(x.copy())
        si += 1

    t = t0
    h = min(first_step, t1 - t0)
    errold = 1e-4
    nacc = nrej = 0
    nrhs = 1
    hmin_seen, hmax_seen = math.inf, 0.0
    k = [np.empty_like(x) for _ in range(7)]
    k[0] = np.asarray(c0, dtype=dtype) @ x

    while t < t1:
        h_use = min(h, t1 - t)
        clipped = h_use < h
        if si < samples.size and t + h_use > samples[si]:
            h_use = samples[si] - t
            clipped = True
        if h_use < 1e-14 * max(1.0, abs(t)):
            raise RuntimeError(f"step size underflow at t={t:g}")
        for stage in range(1, 7):
            y = x.copy()
            a_row = _A[stage]
            for j, a in enumerate(a_row):
                if a != 0.0:
                    y += (h_use * a) * k[j]
            k[stage] = np.asarray(coefficient(t + _C[stage] * h_use), dtype=dtype) @ y
            nrhs += 1
        x_new = x.copy()
        for j, b in enumerate(_B):
            if b != 0.0:
                x_new += (h_use * b) * k[j]
        err_vec = np.zeros_like(x)
        for j, e in enumerate(_E):
            if e != 0.0:
                err_vec += (h_use * e) * k[j]
        scale = atol + rtol * np.maximum(np.abs(x), np.abs(x_new))
        err = math.sqrt(float(np.mean(np.abs(err_vec / scale) ** 2)))
        if err <= 1.0:
            t = t + h_use
            x = x_new
            if not np.all(np.isfinite(np.abs(x))):
                raise RuntimeError(f"non-finite state at t={t:g}")
            k[0] = k[6]
            nacc += 1
            hmin_seen = min(hmin_seen, h_use)
            hmax_seen = max(hmax_seen, h_use)
            while si < samples.size and t >= samples[si] - 1e-12 * max(1.0, abs(t)):
                out_t.append(t)
                out_x.append(x.copy())
                si += 1
            fac = _SAFETY * err ** (-_KI) * errold ** _KP if err > 0 else _MAX_FACTOR
            fac = min(_MAX_FACTOR, max(_MIN_FACTOR, fac))
            errold = max(err, 1e-4)
            h = max(h, h_use * fac) if clipped else h_use * fac
        else:
            nrej += 1
            h = h_use * max(_MIN_FACTOR, _SAFETY * err ** -0.2)
        if nacc + nrej > max_steps:
            raise RuntimeError("step budget exhausted")

    stats = StepStats(nacc, nrej, nrhs, hmin_seen, hmax_seen)
    return IntegrationResult(
        t=np.array(out_t), states=np.array(out_x), rtol=rtol, atol=atol, stats=stats
    )


def integrate_oscillator(lam: float, alpha: float, t0: float, t1: float,
                         rtol: float = 1e-8, atol: float = 1e-12,
                         sample_times: Optional[Sequence[float]] = None) -> IntegrationResult:
    """Fast specialized path for  y'' + (1 + t^-alpha sin(lam t)) y = 0.

    Same Dormand-Prince pair and controller as :func:`integrate_system`, with
    the 2x2 right-hand side unrolled into scalar arithmetic so that horizons
    of 10^5..10^6 stay at desk-scale runtimes.
    """
    if t1 <= t0:
        raise ValueError("need t1 > t0")
    lam = float(lam)
    alpha = float(alpha)
    samples = _prepare_samples(t0, t1, sample_times)
    ts = samples.tolist()
    ns = len(ts)
    sin = math.sin
    sqrt = math.sqrt

    t = t0
    a, b, c, d = 1.0, 0.0, 0.0, 1.0
    out_t, out_x = [], []
    si = 0
    while si < ns and ts[si] <= t0:
        out_t.append(t0)
        out_x.append((a, b, c, d))
        si += 1

    h = min(1e-2, t1 - t0)
    errold = 1e-4
    nacc = nrej = 0
    nrhs = 1
    hmin_seen, hmax_seen = math.inf, 0.0

    p = 1.0 + sin(lam * t) * t ** (-alpha)
    k1a, k1b, k1c, k1d = c, d, -p * a, -p * b
    A21 = 1 / 5
    A31, A32 = 3 / 40, 9 / 40
    A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
    A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
    A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
    B1, B3, B4, B5, B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
    E1, E3, E4, E5, E6, E7 = _E[0], _E[2], _E[3], _E[4], _E[5], _E[6]
    C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9

    while t < t1:
        h_use = h if t + h <= t1 else t1 - t
        clipped = h_use < h
        if si < ns and t + h_use > ts[si]:
            h_use = ts[si] - t
            clipped = True
        if h_use < 1e-14 * max(1.0, abs(t)):
            raise RuntimeError(f"step size underflow at t={t:g}")

        tt = t + C2 * h_use
        ya = a + h_use * A21 * k1a; yb = b + h_use * A21 * k1b
        yc = c + h_use * A21 * k1c; yd = d + h_use * A21 * k1d
        p = 1.0 + sin(lam * tt) * tt ** (-alpha)
        k2a, k2b, k2c, k2d = yc, yd, -p * ya, -p * yb

        tt = t + C3 * h_use
        ya = a + h_use * (A31 * k1a + A32 * k2a); yb = b + h_use * (A31 * k1b + A32 * k2b)
        yc = c + h_use * (A31 * k1c + A32 * k2c); yd = d + h_use * (A31 * k1d + A32 * k2d)
        p = 1.0 + sin(lam * tt) * tt ** (-alpha)
        k3a, k3b, k3c, k3d = yc, yd, -p * ya, -p * yb

        tt = t + C4 * h_use
        ya = a + h_use * (A41 * k1a + A42 * k2a + A43 * k3a)
        yb = b + h_use * (A41 * k1b + A42 * k2b + A43 * k3b)
        yc = c + h_use * (A41 * k1c + A42 * k2c + A43 * k3c)
        yd = d + h_use * (A41 * k1d + A42 * k2d + A43 * k3d)
        p = 1.0 + sin(lam * tt) * tt ** (-alpha)
        k4a, k4b, k4c, k4d = yc, yd, -p * ya, -p * yb

        tt = t + C5 * h_use
        ya = a + h_use * (A51 * k1a + A52 * k2a + A53 * k3a + A54 * k4a)
        yb = b + h_use * (A51 * k1b + A52 * k2b + A53 * k3b + A54 * k4b)
        yc = c + h_use * (A51 * k1c + A52 * k2c + A53 * k3c + A54 * k4c)
        yd = d + h_use * (A51 * k1d + A52 * k2d + A53 * k3d + A54 * k4d)
        p = 1.0 + sin(lam * tt) * tt ** (-alpha)
        k5a, k5b, k5c, k5d = yc, yd, -p * ya, -p * yb

        tt = t + h_use
        ya = a + h_use * (A61 * k1a + A62 * k2a + A63 * k3a + A64 * k4a + A65 * k5a)
        yb = b + h_use * (A61 * k1b + A62 * k2b + A63 * k3b + A64 * k4b + A65 * k5b)
        yc = c + h_use * (A61 * k1c + A62 * k2c + A63 * k3c + A64 * k4c + A65 * k5c)
        yd = d + h_use * (A61 * k1d + A62 * k2d + A63 * k3d + A64 * k4d + A65 * k5d)
        p = 1.0 + sin(lam * tt) * tt ** (-alpha)
        k6a, k6b, k6c, k6d = yc, yd, -p * ya, -p * yb

        na = a + h_use * (B1 * k1a + B3 * k3a + B4 * k4a + B5 * k5a + B6 * k6a)
        nb = b + h_use * (B1 * k1b + B3 * k3b + B4 * k4b + B5 * k5b + B6 * k6b)
        nc = c + h_use * (B1 * k1c + B3 * k3c + B4 * k4c + B5 * k5c + B6 * k6c)
        nd = d + h_use * (B1 * k1d + B3 * k3d + B4 * k4d + B5 * k5d + B6 * k6d)
        k7a, k7b, k7c, k7d = nc, nd, -p * na, -p * nb
        nrhs += 6

        ea = h_use * (E1 * k1a + E3 * k3a + E4 * k4a + E5 * k5a + E6 * k6a + E7 * k7a)
        eb = h_use * (E1 * k1b + E3 * k3b + E4 * k4b + E5 * k5b + E6 * k6b + E7 * k7b)
        ec = h_use * (E1 * k1c + E3 * k3c + E4 * k4c + E5 * k5c + E6 * k6c + E7 * k7c)
        ed = h_use * (E1 * k1d + E3 * k3d + E4 * k4d + E5 * k5d + E6 * k6d + E7 * k7d)
        sa = atol + rtol * (abs(a) if abs(a) > abs(na) else abs(na))
        sb = atol + rtol * (abs(b) if abs(b) > abs(nb) else abs(nb))
        sc = atol + rtol * (abs(c) if abs(c) > abs(nc) else abs(nc))
        sd = atol + rtol * (abs(d) if abs(d) > abs(nd) else abs(nd))
        err = sqrt(((ea / sa) ** 2 + (eb / sb) ** 2 + (ec / sc) ** 2 + (ed / sd) ** 2) * 0.25)

        if err <= 1.0:
            t = t + h_use
            a, b, c, d = na, nb, nc, nd
            if not (math.isfinite(a) and math.isfinite(b) and math.isfinite(c) and math.isfinite(d)):
                raise RuntimeError(f"non-finite state at t={t:g}")
            k1a, k1b, k1c, k1d = k7a, k7b, k7c, k7d
            nacc += 1
            if h_use < hmin_seen:
                hmin_seen = h_use
            if h_use > hmax_seen:
                hmax_seen = h_use
            while si < ns and t >= ts[si] - 1e-12 * (abs(t) if abs(t) > 1.0 else 1.0):
                out_t.append(t)
                out_x.append((a, b, c, d))
                si += 1
            fac = _SAFETY * err ** (-_KI) * errold ** _KP if err > 0 else _MAX_FACTOR
            fac = _MAX_FACTOR if fac > _MAX_FACTOR else (_MIN_FACTOR if fac < _MIN_FACTOR else fac)
            errold = err if err > 1e-4 else 1e-4
            h = (h if h > h_use * fac else h_use * fac) if clipped else h_use * fac
        else:
            nrej += 1
            fac = _SAFETY * err ** -0.2
            h = h_use * (fac if fac > _MIN_FACTOR else _MIN_FACTOR)

    states = np.array(out_x).reshape(-1, 2, 2)
    stats = StepStats(nacc, nrej, nrhs, hmin_seen, hmax_seen)
    return IntegrationResult(
        t=np.array(out_t), states=states, rtol=rtol, atol=atol, stats=stats
    )


# -- envelopes and fits --------------------------------------------------------


@dataclass
class Envelope:
    """Column amplitudes r_i(t) = ||i-th fundamental column|| at the snapshots."""

    t: np.ndarray
    r: np.ndarray  # shape (len(t), n)


def amplitude_envelope(result: IntegrationResult,
                       at_local_maxima: bool = False) -> Envelope:
    """Pointwise Euclidean norm of each fundamental column.

    With ``at_local_maxima`` the samples are thinned to interior local maxima
    of the first column's amplitude.
    """
    r = np.linalg.norm(np.abs(result.states), axis=1)
    t = result.t
    if at_local_maxima and len(t) > 2:
        r0 = r[:, 0]
        keep = np.nonzero((r0[1:-1] >= r0[:-2]) & (r0[1:-1] >= r0[2:]))[0] + 1
        return Envelope(t=t[keep], r=r[keep])
    return Envelope(t=t, r=r)


@dataclass
class OracleFit:
    """A fitted growth model for one envelope.

    ``estimate`` is the model's single parameter: the exponent of t for
    ``polynomial``, the coefficient of t^abscissa_exponent in ln r for
    ``stretched_exponential``, the coefficient of ln t in the phase drift for
    ``log_phase``, and the maximum relative deviation from the median for
    ``bounded``.
    """

    model: str
    estimate: float
    stderr: float
    window: tuple
    n_samples: int
    abscissa_exponent: Optional[float] = None
    column: Optional[int] = None


def _ols(x: np.ndarray, y: np.ndarray):
    n = len(x)
    xm, ym = x.mean(), y.mean()
    sxx = float(((x - xm) ** 2).sum())
    slope = float(((x - xm) * (y - ym)).sum()) / sxx
    resid = y - ym - slope * (x - xm)
    dof = max(n - 2, 1)
    stderr = math.sqrt(float((resid ** 2).sum()) / dof / sxx)
    return slope, stderr


def _check_span(t: np.ndarray, min_samples: int = 50, min_ratio: float = 100.0):
    if len(t) < min_samples:
        raise InsufficientSpanError(
            f"need at least {min_samples} samples in the fit window, got {len(t)}"
        )
    if t[-1] / t[0] < min_ratio:
        raise InsufficientSpanError(
            f"fit window spans a factor {t[-1] / t[0]:.3g} in t; need >= {min_ratio:g}"
        )


def fit_growth(envelope: Envelope, model: str, window: tuple,
               column: Optional[int] = None,
               abscissa_exponent: Optional[float] = None) -> OracleFit:
    """Least-squares fit of one growth model over a time window.

    For growth models the fitted slope is ln r against the model's natural
    abscissa (ln t for ``polynomial``, t^abscissa_exponent for
    ``stretched_exponential``).  When no column is given, growth models report
    the fastest-growing column and ``bounded`` reports the worst one.
    """
    lo, hi = window
    mask = (envelope.t >= lo) & (envelope.t <= hi)
    t = envelope.t[mask]
    _check_span(t)
    columns = [column] if column is not None else range(envelope.r.shape[1])
    best = None
    for col in columns:
        r = envelope.r[mask, col]
        if model == "bounded":
            med = float(np.median(r))
            estimate = float(np.max(np.abs(r / med - 1.0)))
            fit = OracleFit(model, estimate, 0.0, (lo, hi), len(t), None, col)
        elif model == "polynomial":
            slope, stderr = _ols(np.log(t), np.log(r))
            fit = OracleFit(model, slope, stderr, (lo, hi), len(t), None, col)
        elif model == "stretched_exponential":
            if abscissa_exponent is None:
                raise ValueError("stretched_exponential needs abscissa_exponent")
            slope, stderr = _ols(t ** abscissa_exponent, np.log(r))
            fit = OracleFit(
                model, slope, stderr, (lo, hi), len(t), abscissa_exponent, col
            )
        else:
            raise ValueError(f"unknown model {model!r}")
        if best is None or fit.estimate > best.estimate:
            best = fit
    return best


def _hermite_root(t0, y0, d0, t1, y1, d1):
    """Root of the cubic Hermite interpolant on [t0, t1]; y0, y1 bracket 0."""
    h = t1 - t0
    s = y0 / (y0 - y1)  # linear initial guess
    for _ in range(12):
        s2, s3 = s * s, s * s * s
        val = (
            (2 * s3 - 3 * s2 + 1) * y0
            + (s3 - 2 * s2 + s) * h * d0
            + (-2 * s3 + 3 * s2) * y1
            + (s3 - s2) * h * d1
        )
        dval = (
            (6 * s2 - 6 * s) * y0
            + (3 * s2 - 4 * s + 1) * h * d0
            + (-6 * s2 + 6 * s) * y1
            + (3 * s2 - 2 * s) * h * d1
        )
        if dval == 0.0:
            break
        step = val / dval
        s -= step
        if s < 0.0:
            s = 0.0
        elif s > 1.0:
            s = 1.0
        if abs(step) < 1e-14:
            break
    return t0 + s * h


def zero_crossings(result: IntegrationResult, column: int = 0) -> np.ndarray:
    """Times where the y-component of one fundamental column crosses zero.

    Snapshots must be spaced below half an oscillation period so every
    crossing is bracketed; crossings are refined on the cubic Hermite
    interpolant through (y, y') at the bracketing samples.
    """
    t = result.t
    y = result.states[:, 0, column]
    yp = result.states[:, 1, column]
    sign = np.sign(y)
    idx = np.nonzero(sign[:-1] * sign[1:] < 0)[0]
    return np.array(
        [
            _hermite_root(t[i], y[i], yp[i], t[i + 1], y[i + 1], yp[i + 1])
            for i in idx
        ]
    )


def fit_log_phase(result: IntegrationResult, window: tuple,
                  column: int = 0) -> OracleFit:
    """Phase-drift coefficient of ln t, measured from zero-crossing times.

    For y ~ cos(t + g*ln t + const) consecutive zero crossings t_m satisfy
    pi*m - t_m = g*ln t_m + const, so the slope of (pi*m - t_m) against
    ln t_m estimates g.
    """
    crossings = zero_crossings(result, column=column)
    lo, hi = window
    crossings = crossings[(crossings >= lo) & (crossings <= hi)]
    _check_span(crossings)
    m = np.arange(len(crossings), dtype=float)
    d = math.pi * m - crossings
    slope, stderr = _ols(np.log(crossings), d)
    return OracleFit("log_phase", slope, stderr, (lo, hi), len(crossings), None, column)


# -- verdicts -------------------------------------------------------------------


@dataclass(frozen=True)
class PredictedTarget:
    """What the pipeline predicts for one measurable quantity."""

    model: str
    value: float


@dataclass(frozen=True)
class ComparisonVerdict:
    verdict: str  # confirmed | rejected | inconclusive
    difference: float
    allowed: float

    @property
    def confirmed(self) -> bool:
        return self.verdict == "confirmed"


def compare_prediction(target: PredictedTarget, fit: OracleFit,
                       tolerance: float) -> ComparisonVerdict:
    """Confirm when |fit - predicted| <= max(3 * stderr, tolerance)."""
    if target.model != fit.model:
        raise ValueError(
            f"model mismatch: prediction is {target.model!r}, fit is {fit.model!r}"
        )
    difference = abs(fit.estimate - target.value)
    allowed = max(3.0 * fit.stderr, tolerance)
    verdict = "confirmed" if difference <= allowed else "rejected"
    return ComparisonVerdict(verdict=verdict, difference=difference, allowed=allowed)


def inconclusive(reason_difference: float = math.nan) -> ComparisonVerdict:
    return ComparisonVerdict(
        verdict="inconclusive", difference=reason_difference, allowed=math.nan
    )


def envelope_csv(envelope: Envelope) -> str:
    """Plot-ready CSV with columns t, r1, r2, ..."""
    ncols = envelope.r.shape[1]
    header = "t," + ",".join(f"r{i + 1}" for i in range(ncols))
    lines = [header]
    for i, t in enumerate(envelope.t):
        row = ",".join(f"{envelope.r[i, j]:.12g}" for j in range(ncols))
        lines.append(f"{t:.12g},{row}")
    return "\n".join(lines) + "\n"
