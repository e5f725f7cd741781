"""
Hilfer-Langevin Command Line
Certifies, solves and stability-checks coupled Hilfer-Langevin boundary-value problems.
"""

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from modules import TOOL_NAME, __version__
from modules.certificates import ParameterSweep, certify, uh_constants
from modules.errors import (
    ConditioningError,
    ConvergenceError,
    DegenerateConstantError,
    DivergenceError,
    DomainError,
    HilferLangevinError,
    ProblemFileError,
    UncertifiedError,
    ValidationError,
)
from modules.problem_file import load_problem, probe_lipschitz
from modules.reports import (
    atomic_write_json,
    certificate_document,
    solve_report,
    stability_document,
    write_csv,
)
from modules.solver import PicardSolver, linear_solve
from modules.stability import StabilityVerifier

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_INPUT = 2
EXIT_MAX_ITER = 3
EXIT_DIVERGED = 4
EXIT_UH_VIOLATED = 5
EXIT_UH_FAILS = 6
EXIT_ILL_CONDITIONED = 7
EXIT_UNCERTIFIED = 8

# First match wins, so subclasses come before their bases
ERROR_EXIT_CODES = (
    (UncertifiedError, EXIT_UNCERTIFIED),
    (ConditioningError, EXIT_ILL_CONDITIONED),
    (DegenerateConstantError, EXIT_UH_FAILS),
    (DivergenceError, EXIT_DIVERGED),
    (ConvergenceError, EXIT_MAX_ITER),
    (HilferLangevinError, EXIT_INPUT),
    (OSError, EXIT_INPUT),
)

STABILITY_DEFAULTS = {
    "eps1": 1e-2,
    "eps2": 1e-2,
    "trials": 20,
    "seed": 0,
}


def setup_logging(log_file, verbose=False):
    logging.basicConfig(
        filename=log_file,
        level=logging.DEBUG if verbose else logging.INFO,
        format='%(asctime)s - %(levelname)s - %(message)s'
    )


def parse_sweep(text):
    """
    Parse NAME=START:STOP:COUNT into a parameter name and its values

    Raises:
        DomainError on malformed text
    """
    name, sep, rest = text.partition("=")
    parts = rest.split(":")
    if not sep or len(parts) != 3:
        raise DomainError(f"--sweep expects NAME=START:STOP:COUNT, got {text!r}")
    try:
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as e:
        raise DomainError(f"--sweep expects NAME=START:STOP:COUNT, got {text!r}") from e
    if count < 1:
        raise DomainError(f"--sweep COUNT must be at least 1, got {count}")
    return name.strip(), np.linspace(start, stop, count).tolist()


def report_path_for(output):
    """out.csv -> out.report.json beside it"""
    output = Path(output)
    return output.with_name(output.stem + ".report.json")


def _lipschitz(problem, args):
    if problem.lipschitz is not None or not getattr(args, "probe", False):
        return problem.lipschitz
    logging.info(f"Estimating Lipschitz constants on the box [-{args.probe_box:g}, {args.probe_box:g}]^2")
    return probe_lipschitz(problem, args.probe_box)


def cmd_certify(args):
    """Write the certificate document; verdicts are data, so failing verdicts still exit 0"""
    problem = load_problem(args.file)
    lipschitz = _lipschitz(problem, args)
    certificate = certify(problem.spec, problem.growth, lipschitz)

    sweep = None
    if args.sweep:
        name, values = parse_sweep(args.sweep)
        sweep = ParameterSweep(args.workers).run(
            problem.spec, name, values, problem.growth, lipschitz, status_callback=logging.info
        )

    atomic_write_json(args.output, certificate_document("certify", problem, certificate, sweep))
    return EXIT_OK


def cmd_solve(args):
    """Write solution samples as CSV plus the run report"""
    problem = load_problem(args.file, n=args.n)
    settings = dict(problem.settings)
    for key in ("tol", "max_iter", "theta"):
        if getattr(args, key) is not None:
            settings[key] = getattr(args, key)

    certificate = None
    if problem.growth is not None or problem.lipschitz is not None:
        certificate = certify(problem.spec, problem.growth, problem.lipschitz)
    if args.certified and not (certificate and certificate.passes("uniqueness")):
        reasons = certificate.verdicts["uniqueness"].reasons if certificate else ("no lipschitz block",)
        raise UncertifiedError(f"--certified requested but uniqueness does not pass: {'; '.join(reasons)}")

    report_path = report_path_for(args.output)
    if args.method == "linear":
        result = linear_solve(problem.spec)
    else:
        solver = PicardSolver(settings["tol"], settings["max_iter"], settings["theta"])
        try:
            result = solver.solve(
                problem.spec,
                certificate=certificate,
                require_certificate=args.certified,
                status_callback=logging.info,
            )
        except DivergenceError as e:
            atomic_write_json(report_path, solve_report("solve", problem, settings, args.method, certificate=certificate, failure=e))
            raise

    write_csv(args.output, result)
    atomic_write_json(report_path, solve_report("solve", problem, settings, args.method, result, certificate))
    if not result.converged:
        print(f"{TOOL_NAME}: max_iter = {settings['max_iter']} reached without convergence", file=sys.stderr)
        return EXIT_MAX_ITER
    return EXIT_OK


def cmd_stability(args):
    """Run seeded perturbation trials against the Ulam-Hyers bound"""
    problem = load_problem(args.file)
    lipschitz = _lipschitz(problem, args)
    if lipschitz is None:
        raise ProblemFileError("required for the stability check (or pass --probe)", "lipschitz")

    settings = dict(problem.settings)
    for key, default in STABILITY_DEFAULTS.items():
        value = getattr(args, key)
        settings[key] = default if value is None else value
    for key in ("eps1", "eps2"):
        if not settings[key] >= 0.0:
            raise DomainError(f"{key} = {settings[key]!r} must be non-negative")
    if settings["trials"] < 1:
        raise DomainError(f"trials = {settings['trials']} must be at least 1")

    constants = uh_constants(problem.spec, lipschitz)
    if not constants.verdict.passed:
        atomic_write_json(args.output, stability_document("stability", problem, settings, constants))
        for reason in constants.verdict.reasons:
            print(f"{TOOL_NAME}: Ulam-Hyers certificate fails: {reason}", file=sys.stderr)
        logging.error(f"Ulam-Hyers certificate fails: {'; '.join(constants.verdict.reasons)}")
        return EXIT_UH_FAILS

    verifier = StabilityVerifier(settings["tol"], settings["max_iter"], settings["theta"], args.workers)
    report = verifier.verify(
        problem.spec,
        lipschitz,
        (settings["eps1"], settings["eps2"]),
        trials=settings["trials"],
        seed=settings["seed"],
        status_callback=logging.info,
    )
    atomic_write_json(args.output, stability_document("stability", problem, settings, constants, report))
    if report.violations:
        return EXIT_UH_VIOLATED
    if report.failures:
        return EXIT_DIVERGED
    return EXIT_OK


def _parse_args(argv=None):
    parser = argparse.ArgumentParser(
        prog=TOOL_NAME,
        description="Existence, uniqueness and Ulam-Hyers certificates and numerical solutions "
                    "for coupled Hilfer-Langevin boundary-value problems.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-file", default="hilfer_langevin.log", help="Log file path")
    parser.add_argument("--verbose", action="store_true", help="Log at DEBUG level")
    commands = parser.add_subparsers(dest="command", required=True)

    certify_cmd = commands.add_parser("certify", help="Compute constants and verdicts")
    certify_cmd.add_argument("file", type=Path)
    certify_cmd.add_argument("-o", "--output", type=Path, required=True)
    certify_cmd.add_argument("--probe", action="store_true", help="Estimate missing Lipschitz constants")
    certify_cmd.add_argument("--probe-box", type=float, default=10.0, help="Probe box half-width R")
    certify_cmd.add_argument("--sweep", help="NAME=START:STOP:COUNT")
    certify_cmd.add_argument("--workers", type=int, default=1)
    certify_cmd.set_defaults(handler=cmd_certify)

    solve_cmd = commands.add_parser("solve", help="Solve the integral form on a uniform grid")
    solve_cmd.add_argument("file", type=Path)
    solve_cmd.add_argument("-o", "--output", type=Path, required=True)
    solve_cmd.add_argument("--method", choices=("picard", "linear"), default="picard")
    solve_cmd.add_argument("--tol", type=float)
    solve_cmd.add_argument("--max-iter", dest="max_iter", type=int)
    solve_cmd.add_argument("--theta", type=float)
    solve_cmd.add_argument("-N", dest="n", type=int, help="Number of grid cells")
    solve_cmd.add_argument("--certified", action="store_true", help="Refuse to solve without a passing uniqueness verdict")
    solve_cmd.set_defaults(handler=cmd_solve)

    stability_cmd = commands.add_parser("stability", help="Empirical Ulam-Hyers verification")
    stability_cmd.add_argument("file", type=Path)
    stability_cmd.add_argument("-o", "--output", type=Path, required=True)
    stability_cmd.add_argument("--eps1", type=float)
    stability_cmd.add_argument("--eps2", type=float)
    stability_cmd.add_argument("--trials", type=int)
    stability_cmd.add_argument("--seed", type=int)
    stability_cmd.add_argument("--workers", type=int, default=1)
    stability_cmd.add_argument("--probe", action="store_true", help="Estimate missing Lipschitz constants")
    stability_cmd.add_argument("--probe-box", type=float, default=10.0, help="Probe box half-width R")
    stability_cmd.set_defaults(handler=cmd_stability)
    return parser.parse_args(argv)


def main(argv=None):
    args = _parse_args(argv)
    setup_logging(args.log_file, args.verbose)
    logging.info(f"{TOOL_NAME} {__version__}: {args.command} {args.file}")

    try:
        return args.handler(args)
    except Exception as e:
        for error_type, code in ERROR_EXIT_CODES:
            if isinstance(e, error_type):
                break
        else:
            logging.exception(f"Unexpected error in {args.command}")
            print(f"{TOOL_NAME}: internal error: {e}", file=sys.stderr)
            return EXIT_INTERNAL

        logging.error(f"{args.command} failed: {e}")
        lines = e.diagnostics if isinstance(e, ValidationError) else [str(e)]
        for line in lines:
            print(f"{TOOL_NAME}: error: {line}", file=sys.stderr)
        return code


if __name__ == "__main__":
    raise SystemExit(main())
