"""Command-line surface: analyze, oscillator, sweep, verify.

Reports keep all exact data exact: rationals are serialized as "p/q" strings
and parse back to identical values; floats appear only in oracle outputs.
Repeated runs with the same configuration produce byte-identical files.

System files for ``analyze`` are JSON:

    {
      "alpha": "1/2",
      "a0": [[["0","0"], ["0","0"]], ...],            # entries as [re, im]
      "grades": [
        {"terms": [{"frequency": "p/q",
                    "matrix": [[["re","im"], ...], ...]}, ...]},
        ...
      ],
      "perturbation": {"delta": "1/2", "bound": 1.0}   # optional
    }
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from fractions import Fraction
from pathlib import Path
from typing import Optional

import numpy as np

from . import oracle
from .averaging import Perturbation, SystemSpec, average_system
from .asymptotics import predict
from .errors import PipelineError, SchemaError, UsageError
from .oscillator import OscillatorCase, analyze_case, equation_coefficient
from .trigpoly import ComplexRational, TrigPolyMatrix, as_rational

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_PIPELINE = 2
EXIT_REJECTED = 3


# -- exact serialization -------------------------------------------------------


def format_rational(x: Fraction) -> str:
    return str(Fraction(x))


def parse_rational(text, path: str) -> Fraction:
    if isinstance(text, int):
        return Fraction(text)
    if not isinstance(text, str):
        raise SchemaError(path, f"expected a rational string, got {type(text).__name__}")
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError):
        raise SchemaError(path, f"invalid rational {text!r}") from None


def format_cq_matrix(matrix) -> list:
    """Real matrices serialize entrywise as "p/q"; complex ones as [re, im]."""
    real = all(entry.im == 0 for row in matrix for entry in row)
    if real:
        return [[format_rational(entry.re) for entry in row] for row in matrix]
    return [
        [[format_rational(entry.re), format_rational(entry.im)] for entry in row]
        for row in matrix
    ]


def parse_cq_entry(raw, path: str) -> ComplexRational:
    if isinstance(raw, (str, int)):
        return ComplexRational(parse_rational(raw, path))
    if isinstance(raw, list) and len(raw) == 2:
        return ComplexRational(
            parse_rational(raw[0], f"{path}[0]"), parse_rational(raw[1], f"{path}[1]")
        )
    raise SchemaError(path, "matrix entry must be 'p/q' or ['re', 'im']")


def parse_cq_matrix(raw, path: str, dim: Optional[int] = None):
    if not isinstance(raw, list) or not raw:
        raise SchemaError(path, "expected a non-empty matrix (list of rows)")
    n = len(raw)
    if dim is not None and n != dim:
        raise SchemaError(path, f"expected {dim} rows, got {n}")
    rows = []
    for i, row in enumerate(raw):
        if not isinstance(row, list) or len(row) != n:
            raise SchemaError(f"{path}[{i}]", f"expected a row of {n} entries")
        rows.append(
            tuple(parse_cq_entry(entry, f"{path}[{i}][{j}]") for j, entry in enumerate(row))
        )
    return tuple(rows)


def parse_trig_poly(raw, path: str, dim: int) -> TrigPolyMatrix:
    if not isinstance(raw, dict) or "terms" not in raw:
        raise SchemaError(path, "expected an object with a 'terms' list")
    terms = raw["terms"]
    if not isinstance(terms, list):
        raise SchemaError(f"{path}.terms", "expected a list")
    acc = []
    for i, term in enumerate(terms):
        tpath = f"{path}.terms[{i}]"
        if not isinstance(term, dict) or "frequency" not in term or "matrix" not in term:
            raise SchemaError(tpath, "expected {'frequency': 'p/q', 'matrix': [...]}")
        freq = parse_rational(term["frequency"], f"{tpath}.frequency")
        matrix = parse_cq_matrix(term["matrix"], f"{tpath}.matrix", dim)
        acc.append((freq, matrix))
    return TrigPolyMatrix.from_terms(dim, acc)


def serialize_trig_poly(poly: TrigPolyMatrix) -> dict:
    return {
        "terms": [
            {
                "frequency": format_rational(freq),
                "matrix": [
                    [
                        [format_rational(entry.re), format_rational(entry.im)]
                        for entry in row
                    ]
                    for row in matrix
                ],
            }
            for freq, matrix in poly.terms
        ]
    }


def load_system_file(path: Path) -> SystemSpec:
    try:
        raw = json.loads(path.read_text())
    except OSError as exc:
        raise UsageError(f"cannot read system file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError("<file>", f"invalid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise SchemaError("<root>", "expected a JSON object")
    if "alpha" not in raw:
        raise SchemaError("alpha", "missing")
    alpha = parse_rational(raw["alpha"], "alpha")
    if "a0" not in raw:
        raise SchemaError("a0", "missing")
    a0 = parse_cq_matrix(raw["a0"], "a0")
    dim = len(a0)
    grades_raw = raw.get("grades")
    if not isinstance(grades_raw, list):
        raise SchemaError("grades", "expected a list of trigonometric polynomials")
    grades = [
        parse_trig_poly(g, f"grades[{i}]", dim) for i, g in enumerate(grades_raw)
    ]
    perturbation = None
    if raw.get("perturbation") is not None:
        p = raw["perturbation"]
        if not isinstance(p, dict) or "delta" not in p or "bound" not in p:
            raise SchemaError("perturbation", "expected {'delta': 'p/q', 'bound': float}")
        try:
            bound = float(p["bound"])
        except (TypeError, ValueError):
            raise SchemaError("perturbation.bound", "expected a number") from None
        perturbation = Perturbation(
            delta=parse_rational(p["delta"], "perturbation.delta"), bound=bound
        )
    try:
        return SystemSpec(a0=a0, alpha=alpha, grades=tuple(grades), perturbation=perturbation)
    except ValueError as exc:
        raise SchemaError("<system>", str(exc)) from exc


# -- reports ---------------------------------------------------------------------


def _growth_entry(g) -> dict:
    out = {"kind": g.kind, "description": g.describe()}
    if g.rate is not None:
        out["rate"] = g.rate
    if g.exponent is not None:
        out["exponent"] = format_rational(g.exponent)
    if g.converging:
        out["converging"] = True
    return out


def prediction_report(prediction) -> dict:
    report = {
        "leading_index": prediction.leading_index,
        "remainder_dominated": prediction.remainder_dominated,
        "epsilon": format_rational(prediction.epsilon),
        "t_star": prediction.t_star,
        "growth_classes": [_growth_entry(g) for g in prediction.growth],
    }
    if not prediction.remainder_dominated:
        report["leading_eigenvalues"] = [
            [mu.real, mu.imag] for mu in prediction.eigenvalues
        ]
    return report


def averaged_report(avg) -> dict:
    return {
        "averaged_matrices": [format_cq_matrix(a) for a in avg.averaged],
        "transform_term_counts": [g.term_count() for g in avg.transform.grades],
        "epsilon": format_rational(avg.epsilon),
        "t_star": avg.t_star,
        "remainder_bound_constant": avg.remainder.bound_constant,
    }


def case_report(case: OscillatorCase) -> dict:
    constants = {}
    if case.constants.rho is not None:
        constants["rho"] = case.constants.rho
    if case.constants.beta is not None:
        constants["beta"] = case.constants.beta
    if case.constants.gamma is not None:
        constants["gamma"] = format_rational(case.constants.gamma)
    if case.constants.phi_coefficient is not None:
        constants["phi_sqrt_t_coefficient"] = format_rational(
            case.constants.phi_coefficient
        )
    forms = []
    for f in case.solution_forms:
        entry = {"envelope": f.envelope_kind, "phase_shift": f.phase_shift,
                 "drift": f.drift_kind}
        if f.envelope_rate is not None:
            entry["envelope_rate"] = f.envelope_rate
        if f.envelope_exponent is not None:
            entry["envelope_exponent"] = format_rational(f.envelope_exponent)
        if f.drift_rate is not None:
            entry["drift_rate"] = f.drift_rate
        if f.drift_exponent is not None:
            entry["drift_exponent"] = format_rational(f.drift_exponent)
        forms.append(entry)
    return {
        "input": {
            "lambda": format_rational(case.lam),
            "alpha": format_rational(case.alpha),
        },
        "resonance_tag": case.resonance_tag,
        "k": case.system.k,
        **averaged_report(case.averaged),
        "prediction": prediction_report(case.prediction),
        "solution_forms": forms,
        "constants": constants,
    }


def write_json(path: Path, payload: dict):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


# -- oracle-backed verification ---------------------------------------------------


def _fit_window(default_hi: float, horizon: Optional[float]) -> tuple:
    hi = horizon if horizon is not None else default_hi
    return (1e2 if hi <= 3.2e4 else 1e3, hi)


def verify_case(case: OscillatorCase, rtol: float = 1e-7,
                horizon: Optional[float] = None) -> dict:
    """Integrate the oscillator directly and compare against the prediction.

    Picks the measurement (envelope exponent, stretched coefficient, phase
    drift or boundedness) from the predicted growth class; horizons default
    to 1e5 for polynomial and bounded runs, 1e4 for stretched-exponential
    ones and 1e6 for slow polynomial exponents.
    """
    lam_f, alpha_f = float(case.lam), float(case.alpha)
    growth = case.prediction.growth
    growing = max(
        (g for g in growth if g.rate is not None), key=lambda g: g.rate, default=growth[0]
    )
    kind = growing.kind

    if kind == "stretched_exponential":
        t1 = horizon or 1e4
        window = (1e2, t1)
        exponent = float(growing.exponent)
        target_value = growing.rate / exponent
        tolerance = 0.1 * abs(target_value)
        model = "stretched_exponential"
    elif kind == "polynomial":
        slow = abs(growing.rate) < 0.15
        t1 = horizon or (1e6 if slow else 1e5)
        window = (1e3, t1)
        target_value = growing.rate
        tolerance = 0.03 if not slow else 0.02
        model = "polynomial"
    elif kind == "log_phase":
        t1 = horizon or 1e5
        window = _fit_window(1e5, horizon)
        target_value = max(g.rate for g in growth)
        tolerance = 0.05 * abs(target_value)
        model = "log_phase"
    else:
        t1 = horizon or 1e5
        window = _fit_window(1e5, horizon)
        target_value = 0.0
        tolerance = 0.10
        model = "bounded"

    t0 = 1.0
    if model == "log_phase":
        dense = np.arange(window[0], t1, 1.0)
        samples = np.unique(np.concatenate([np.geomspace(t0, t1, 400), dense, [t1]]))
    else:
        samples = np.geomspace(t0, t1, 1600)
    result = oracle.integrate_oscillator(
        lam_f, alpha_f, t0, t1, rtol=rtol, atol=1e-12, sample_times=samples
    )
    envelope = oracle.amplitude_envelope(result)
    try:
        if model == "log_phase":
            fit = oracle.fit_log_phase(result, window=window)
        elif model == "stretched_exponential":
            fit = oracle.fit_growth(
                envelope, model, window=window,
                abscissa_exponent=float(growing.exponent),
            )
        else:
            fit = oracle.fit_growth(envelope, model, window=window)
        verdict = oracle.compare_prediction(
            oracle.PredictedTarget(model=model, value=target_value), fit, tolerance
        )
    except PipelineError:
        fit = None
        verdict = oracle.inconclusive()
    report = {
        "model": model,
        "predicted": target_value,
        "tolerance": tolerance,
        "window": list(window),
        "horizon": t1,
        "rtol": rtol,
        "verdict": verdict.verdict,
        "difference": verdict.difference,
        "allowed": verdict.allowed,
    }
    if fit is not None:
        report["estimate"] = fit.estimate
        report["stderr"] = fit.stderr
        report["n_samples"] = fit.n_samples
    return report, envelope


# -- command implementations -------------------------------------------------------


def cmd_analyze(args) -> int:
    spec = load_system_file(Path(args.system))
    avg = average_system(spec)
    prediction = predict(avg)
    report = {
        "input": {
            "alpha": format_rational(spec.alpha),
            "dim": spec.dim,
            "k": spec.k,
            "a0": format_cq_matrix(spec.a0),
        },
        **averaged_report(avg),
        "prediction": prediction_report(prediction),
        "transform": [serialize_trig_poly(g) for g in avg.transform.grades],
    }
    out_dir = Path(args.out)
    write_json(out_dir / "report.json", report)
    print(f"report written to {out_dir / 'report.json'}")
    return EXIT_OK


def _parse_lambda_alpha(args):
    if args.lam is None or args.alpha is None:
        raise UsageError("--lambda and --alpha are required")
    lam = parse_rational(args.lam, "--lambda")
    alpha = parse_rational(args.alpha, "--alpha")
    return lam, alpha


def cmd_oscillator(args) -> int:
    lam, alpha = _parse_lambda_alpha(args)
    case = analyze_case(lam, alpha)
    report = case_report(case)
    out_dir = Path(args.out)
    exit_code = EXIT_OK
    if args.verify:
        verify, envelope = verify_case(case, rtol=args.rtol, horizon=args.horizon)
        report["oracle"] = verify
        (out_dir / "envelope.csv").parent.mkdir(parents=True, exist_ok=True)
        (out_dir / "envelope.csv").write_text(oracle.envelope_csv(envelope))
        if verify["verdict"] == "rejected":
            exit_code = EXIT_REJECTED
    write_json(out_dir / "report.json", report)
    print(f"report written to {out_dir / 'report.json'}")
    if args.verify:
        print(f"oracle verdict: {report['oracle']['verdict']}")
    return exit_code


def cmd_verify(args) -> int:
    lam, alpha = _parse_lambda_alpha(args)
    case = analyze_case(lam, alpha)
    verify, envelope = verify_case(case, rtol=args.rtol, horizon=args.horizon)
    out_dir = Path(args.out)
    write_json(out_dir / "report.json", {**case_report(case), "oracle": verify})
    (out_dir / "envelope.csv").write_text(oracle.envelope_csv(envelope))
    print(
        f"verdict: {verify['verdict']} "
        f"(predicted {verify['predicted']:.6g}, "
        f"measured {verify.get('estimate', math.nan):.6g})"
    )
    return EXIT_OK if verify["verdict"] == "confirmed" else EXIT_REJECTED


def parse_grid(spec: str) -> tuple:
    """Grid spec 'lambda=lo:hi:steps,alpha=lo:hi:steps' with rational bounds.

    Cells are the cartesian product of exact linearly spaced rational values.
    """
    parts = dict()
    for chunk in spec.split(","):
        if "=" not in chunk:
            raise UsageError(f"bad grid chunk {chunk!r}; expected name=lo:hi:steps")
        name, rng = chunk.split("=", 1)
        name = name.strip()
        if name not in ("lambda", "alpha"):
            raise UsageError(f"unknown grid axis {name!r}")
        pieces = rng.split(":")
        if len(pieces) == 1:
            lo = hi = parse_rational(pieces[0], name)
            steps = 1
        elif len(pieces) == 3:
            lo = parse_rational(pieces[0], name)
            hi = parse_rational(pieces[1], name)
            try:
                steps = int(pieces[2])
            except ValueError:
                raise UsageError(f"grid steps must be an integer in {chunk!r}") from None
        else:
            raise UsageError(f"bad grid range {rng!r}; expected lo:hi:steps")
        if steps < 1:
            raise UsageError("grid steps must be >= 1")
        if steps == 1:
            values = [lo]
        else:
            step = (hi - lo) / (steps - 1)
            values = [lo + i * step for i in range(steps)]
        parts[name] = values
    if "lambda" not in parts or "alpha" not in parts:
        raise UsageError("grid needs both lambda=... and alpha=...")
    return parts["lambda"], parts["alpha"]


def cmd_sweep(args) -> int:
    if not args.grid:
        raise UsageError("--grid is required")
    lams, alphas = parse_grid(args.grid)
    rows = [
        "lambda,alpha,resonance,k,epsilon,leading_index,growth,rate,growth_exponent,error"
    ]
    for lam in lams:
        for alpha in alphas:
            base = f"{format_rational(lam)},{format_rational(alpha)}"
            try:
                case = analyze_case(lam, alpha)
                growth = case.prediction.growth
                growing = max(
                    (g for g in growth if g.rate is not None),
                    key=lambda g: g.rate,
                    default=growth[0],
                )
                l = case.prediction.leading_index
                rate = f"{growing.rate:.12g}" if growing.rate is not None else ""
                gexp = (
                    format_rational(growing.exponent)
                    if growing.exponent is not None
                    else ""
                )
                rows.append(
                    f"{base},{case.resonance_tag},{case.system.k},"
                    f"{format_rational(case.averaged.epsilon)},"
                    f"{'' if l is None else l},{growing.kind},{rate},{gexp},"
                )
            except (PipelineError, ValueError) as exc:
                rows.append(f"{base},,,,,,,,\"{exc}\"")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "sweep.csv").write_text("\n".join(rows) + "\n")
    print(f"sweep written to {out_dir / 'sweep.csv'} ({len(rows) - 1} cells)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oscavg",
        description=(
            "Averaging-based asymptotic analysis of linear ODE systems with "
            "oscillatory decreasing coefficients"
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", default="out", help="output directory")

    p_an = sub.add_parser("analyze", help="run the pipeline on a system file")
    p_an.add_argument("--system", required=True, help="JSON system file")
    common(p_an)

    p_osc = sub.add_parser("oscillator", help="analyze one (lambda, alpha) case")
    p_osc.add_argument("--lambda", dest="lam", help="rational lambda, e.g. 2 or 2/3")
    p_osc.add_argument("--alpha", dest="alpha", help="rational alpha in (0, 1]")
    p_osc.add_argument("--verify", action="store_true", help="also run the oracle")
    p_osc.add_argument("--rtol", type=float, default=1e-7)
    p_osc.add_argument("--horizon", type=float, default=None)
    common(p_osc)

    p_ver = sub.add_parser("verify", help="prediction vs direct integration")
    p_ver.add_argument("--lambda", dest="lam")
    p_ver.add_argument("--alpha", dest="alpha")
    p_ver.add_argument("--rtol", type=float, default=1e-7)
    p_ver.add_argument("--horizon", type=float, default=None)
    common(p_ver)

    p_sw = sub.add_parser("sweep", help="classify a (lambda, alpha) grid")
    p_sw.add_argument("--grid", help="lambda=lo:hi:steps,alpha=lo:hi:steps")
    common(p_sw)

    return parser


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "analyze":
            return cmd_analyze(args)
        if args.command == "oscillator":
            return cmd_oscillator(args)
        if args.command == "verify":
            return cmd_verify(args)
        if args.command == "sweep":
            return cmd_sweep(args)
        raise UsageError(f"unknown command {args.command!r}")
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PipelineError as exc:
        print(f"pipeline error: {exc}", file=sys.stderr)
        return EXIT_PIPELINE


if __name__ == "__main__":
    sys.exit(main())
