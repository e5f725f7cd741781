"""
Reports Module
Deterministic report documents and atomic writers for JSON and CSV output
"""

import csv
import io
import json
import logging
import math
import os
from pathlib import Path

from modules import TOOL_NAME, __version__
from modules.certificates import CERTIFICATE_NOTES, NOTE_BOUNDARY_FUNCTIONALS, NOTE_CAPUTO_LIMIT
from modules.problem_file import problem_echo

NOTE_SAMPLED_ZEROS = "{keys} sampled as sup |f(t,0,0)|, sup |g(t,0,0)| over 4N+1 points."
SOLVE_NOTES = (NOTE_BOUNDARY_FUNCTIONALS, NOTE_CAPUTO_LIMIT)


def round15(value):
    """Round a computed float to 15 significant digits; non-finite values become strings"""
    if value is None or isinstance(value, (bool, str, int)):
        return value
    value = float(value)
    if not math.isfinite(value):
        return "nan" if math.isnan(value) else ("inf" if value > 0 else "-inf")
    return float(format(value, ".15g"))


def rounded(obj):
    """round15 applied to every number inside nested dicts, lists and tuples"""
    if isinstance(obj, dict):
        return {key: rounded(value) for key, value in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [rounded(value) for value in obj]
    return round15(obj)


def atomic_write_text(path, text):
    """Write text through a temporary sibling file and rename it into place"""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    try:
        with tmp.open("w", encoding="utf-8", newline="\n") as f:
            f.write(text)
            f.flush()
            os.fsync(f.fileno())
        os.replace(str(tmp), str(path))
    finally:
        if tmp.exists():
            tmp.unlink()
    logging.info(f"Wrote {path}")


def atomic_write_json(path, obj):
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n")


def solution_csv(result):
    """CSV text with header t,x,y and %.15g values"""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(("t", "x", "y"))
    for t, x, y in zip(result.x.t, result.x.values, result.y.values):
        writer.writerow(("%.15g" % t, "%.15g" % x, "%.15g" % y))
    return buffer.getvalue()


def write_csv(path, result):
    atomic_write_text(path, solution_csv(result))


def _header(command, problem):
    return {
        "tool": {"name": TOOL_NAME, "version": __version__},
        "command": command,
        "input": problem_echo(problem),
    }


def _hypotheses(problem, growth, lipschitz):
    section = {"growth": None, "lipschitz": None}
    if growth is not None:
        section["growth"] = rounded({
            "M1": growth.M1, "M2": growth.M2, "M3": growth.M3,
            "Mbar1": growth.Mbar1, "Mbar2": growth.Mbar2, "Mbar3": growth.Mbar3,
        })
        section["growth"]["source"] = growth.source
    if lipschitz is not None:
        section["lipschitz"] = rounded({
            "L1cal": lipschitz.L1cal, "L2cal": lipschitz.L2cal,
            "L1zero": lipschitz.L1zero, "L2zero": lipschitz.L2zero,
        })
        section["lipschitz"]["source"] = lipschitz.source
        section["lipschitz"]["sampled"] = list(problem.sampled_zeros) if lipschitz.source == "user" else ["L1zero", "L2zero"]
    return section


def _notes(problem, base):
    notes = list(base)
    if problem.sampled_zeros:
        notes.append(NOTE_SAMPLED_ZEROS.format(keys=" and ".join(problem.sampled_zeros)))
    return notes


def _verdicts(certificate):
    return {name: {"status": v.status, "reasons": list(v.reasons)} for name, v in certificate.verdicts.items()}


def certificate_document(command, problem, certificate, sweep=None):
    """
    Certificate document: constants, hypotheses, verdicts and notes

    Args:
        command: Command name recorded in the document
        problem: ProblemFile the certificate was computed from
        certificate: Certificate
        sweep: Optional list of ParameterSweep rows

    Returns:
        Dictionary ready for atomic_write_json
    """
    document = _header(command, problem)
    document["constants"] = rounded(certificate.constants())
    document["hypotheses"] = _hypotheses(problem, certificate.growth_hypothesis, certificate.lipschitz_hypothesis)
    document["verdicts"] = _verdicts(certificate)
    document["notes"] = _notes(problem, certificate.notes)
    if sweep is not None:
        document["sweep"] = rounded(sweep)
    return document


def _ball_check(name, bound, norm):
    return {"name": name, "bound": round15(bound), "norm": round15(norm), "within": norm <= bound}


def solve_report(command, problem, settings, method, result=None, certificate=None, failure=None):
    """
    Run report of one solve

    A failed run (failure set, result None) records the error and its
    iteration trace in place of the solution data.
    """
    document = _header(command, problem)
    document["method"] = method
    document["settings"] = rounded(settings)
    document["notes"] = _notes(problem, certificate.notes if certificate else SOLVE_NOTES)
    document["verdicts"] = _verdicts(certificate) if certificate else None

    if result is None:
        trace = getattr(failure, "trace", ())
        document.update(
            status="diverged",
            converged=False,
            error=str(failure),
            iterations=len(trace),
            error_trace=rounded(trace),
            contraction_ratios=[],
            contraction_violations=[],
            residuals=None,
            certified=False,
            kappa=None,
            solution_norm=None,
            bound_checks=[],
        )
        return document

    checks = []
    if certificate is not None:
        if certificate.uniqueness is not None and certificate.uniqueness.radius is not None:
            checks.append(_ball_check("uniqueness_radius", certificate.uniqueness.radius, result.norm))
        if certificate.existence is not None and certificate.existence.ls_bound is not None:
            checks.append(_ball_check("leray_schauder_bound", certificate.existence.ls_bound, result.norm))
    for check in checks:
        if not check["within"]:
            logging.warning(f"Solution norm {check['norm']} exceeds {check['name']} {check['bound']}")

    document.update(
        status=result.status,
        converged=result.converged,
        error=None,
        iterations=result.iterations,
        error_trace=rounded(result.error_trace),
        contraction_ratios=rounded(result.contraction_ratios),
        contraction_violations=list(result.contraction_violations),
        residuals=rounded(result.residuals.as_dict()) if result.residuals else None,
        certified=result.certified,
        kappa=round15(result.kappa),
        solution_norm=round15(result.norm),
        bound_checks=checks,
    )
    return document


def stability_document(command, problem, settings, constants, report=None):
    """
    Stability report: Ulam-Hyers constants, per-trial table and summary

    Args:
        constants: UlamHyersConstants of the problem
        report: StabilityReport, or None when the certificate failed and no trial ran
    """
    document = _header(command, problem)
    document["settings"] = rounded(settings)
    document["notes"] = _notes(problem, CERTIFICATE_NOTES)
    document["constants"] = rounded({
        name: getattr(constants, name) for name in ("A1", "B1", "C1", "A2", "B2", "C2", "Delta", "lambda_uh")
    })
    document["verdict"] = {"status": constants.verdict.status, "reasons": list(constants.verdict.reasons)}

    if report is None:
        document.update(eps=None, component_coefficients=None, trials=[], summary=None)
        return document

    (cx1, cx2), (cy1, cy2) = report.component_coefficients
    document["eps"] = rounded({"eps1": report.eps1, "eps2": report.eps2})
    document["component_coefficients"] = rounded({
        "x_eps1": cx1, "x_eps2": cx2, "y_eps1": cy1, "y_eps2": cy2,
    })
    document["trials"] = [
        rounded({
            "index": trial.index,
            "status": trial.status,
            "d": trial.d,
            "d_x": trial.d_x,
            "d_y": trial.d_y,
            "bound": trial.bound,
            "ratio": trial.ratio,
            "bound_x": trial.bound_x,
            "bound_y": trial.bound_y,
            "iterations": trial.iterations,
            "error": trial.error,
            "h1": trial.h1,
            "h2": trial.h2,
        })
        for trial in report.trials
    ]
    document["summary"] = rounded({
        "trials": len(report.trials),
        "max_ratio": report.max_ratio,
        "passed": report.passed,
        "violations": report.violations,
        "failures": report.failures,
        "phi_eps": report.bound,
        "base_iterations": report.base_iterations,
        "base_converged": report.base_converged,
    })
    return document
