"""
Stability Module
Empirical Ulam-Hyers verification: perturb f and g by bounded functions of t,
re-solve under the same boundary conditions and compare against lambda * eps
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from modules.certificates import uh_constants
from modules.errors import ConvergenceError, ExprEvalError, ValidationError
from modules.exprlang import BinaryOp, evaluate, free_variables, parse, to_source
from modules.fracops import grid_nodes
from modules.solver import PicardSolver

TRIG_DEGREE = 5
SAMPLING_FACTOR = 4
SUP_SLACK = 1e-9


@dataclass(frozen=True)
class PerturbationSpec:
    """Bounded forcing perturbations h1, h2 of t alone, |h1| <= eps1 and |h2| <= eps2"""

    eps1: float
    eps2: float
    h1: object
    h2: object
    trials: int = 1
    seed: int = 0


def _sup_on_dense_grid(expr, spec):
    t = grid_nodes(spec.a, spec.b, SAMPLING_FACTOR * spec.n)
    zeros = np.zeros_like(t)
    return float(np.max(np.abs(evaluate(expr, t, zeros, zeros))))


def check_perturbation(spec, pert):
    """
    Check that h1, h2 depend on t only and respect their sup bounds

    Returns:
        Tuple of (success: bool, message: str)
    """
    for name, eps in (("eps1", pert.eps1), ("eps2", pert.eps2)):
        if not (math.isfinite(eps) and eps >= 0.0):
            return (False, f"{name} = {eps!r} must be a non-negative real")
    for name, expr, eps in (("h1", pert.h1, pert.eps1), ("h2", pert.h2, pert.eps2)):
        extra = free_variables(expr) - {"t"}
        if extra:
            return (False, f"{name} must depend on t only, found {', '.join(sorted(extra))}")
        sup = _sup_on_dense_grid(expr, spec)
        if sup > eps * (1.0 + SUP_SLACK):
            return (False, f"sup |{name}| = {sup:.6g} exceeds {name.replace('h', 'eps')} = {eps:.6g}")
    return (True, "perturbation within bounds")


def perturbed_problem(spec, pert):
    """Same problem with f -> f + h1 and g -> g + h2"""
    return replace(spec, f=BinaryOp("+", spec.f, pert.h1), g=BinaryOp("+", spec.g, pert.h2))


def perturbed_solve(spec, pert, solver=None):
    """
    Solve the perturbed problem under identical boundary conditions

    Raises:
        ValidationError when a perturbation violates its bound
    """
    ok, message = check_perturbation(spec, pert)
    if not ok:
        raise ValidationError([message])
    solver = solver or PicardSolver()
    return solver.solve(perturbed_problem(spec, pert))


def random_trig_polynomial(rng, a, b, degree=TRIG_DEGREE):
    """Source of c0 + sum_k (a_k cos(k w (t-a)) + b_k sin(k w (t-a))), w = 2 pi/(b-a)"""
    coeffs = rng.standard_normal(2 * degree + 1)
    omega = 2.0 * math.pi / (b - a)
    parts = [repr(float(coeffs[0]))]
    for k in range(1, degree + 1):
        phase = f"{k * omega!r} * (t - {float(a)!r})"
        parts.append(f"{float(coeffs[2 * k - 1])!r} * cos({phase})")
        parts.append(f"{float(coeffs[2 * k])!r} * sin({phase})")
    return " + ".join(parts)


def scaled_perturbation(spec, rng, eps):
    """Random trigonometric polynomial rescaled to sup norm eps on the dense grid"""
    shape = parse(random_trig_polynomial(rng, spec.a, spec.b))
    sup = _sup_on_dense_grid(shape, spec)
    scale = eps / sup if sup > 0.0 else 0.0
    return parse(f"{scale!r} * ({to_source(shape)})")


@dataclass
class TrialOutcome:
    index: int
    status: str
    d: Optional[float] = None
    d_x: Optional[float] = None
    d_y: Optional[float] = None
    bound: Optional[float] = None
    ratio: Optional[float] = None
    bound_x: Optional[float] = None
    bound_y: Optional[float] = None
    iterations: Optional[int] = None
    error: Optional[str] = None
    h1: str = ""
    h2: str = ""


@dataclass
class StabilityReport:
    eps1: float
    eps2: float
    lambda_uh: float
    bound: float
    component_coefficients: tuple
    base_iterations: int
    base_converged: bool
    trials: list = field(default_factory=list)

    @property
    def completed(self):
        return [trial for trial in self.trials if trial.ratio is not None]

    @property
    def max_ratio(self):
        ratios = [trial.ratio for trial in self.completed]
        return max(ratios) if ratios else None

    @property
    def violations(self):
        return sum(1 for trial in self.trials if trial.status == "violation")

    @property
    def failures(self):
        return sum(1 for trial in self.trials if trial.status == "failed")

    @property
    def passed(self):
        return self.violations == 0 and self.failures == 0


class StabilityVerifier:
    """Handles seeded Ulam-Hyers perturbation trials"""

    def __init__(self, tol=1e-10, max_iter=500, theta=1.0, workers=1):
        self.solver = PicardSolver(tol, max_iter, theta)
        self.workers = max(1, int(workers))

    def verify(self, spec, hyp, eps, trials=20, seed=0, progress_callback=None, status_callback=None):
        """
        Run perturbation trials against the Ulam-Hyers bound

        Args:
            spec: Validated problem specification
            hyp: LipschitzHypothesis used for the constants
            eps: (eps1, eps2)
            trials: Number of trials
            seed: Seed; trial i draws from SeedSequence([seed, i])
            progress_callback: Function to call with progress updates (0-100)
            status_callback: Function to call with status messages

        Returns:
            StabilityReport with trials ordered by index
        """
        eps1, eps2 = (float(e) for e in eps)
        constants = uh_constants(spec, hyp)
        if not constants.verdict.passed:
            raise ValidationError(["Ulam-Hyers certificate fails: " + "; ".join(constants.verdict.reasons)])

        eps = max(eps1, eps2)
        bound = constants.phi(eps)
        (cx1, cx2), (cy1, cy2) = constants.component_coefficients()
        bound_x = cx1 * eps1 + cx2 * eps2
        bound_y = cy1 * eps1 + cy2 * eps2

        if status_callback:
            status_callback(f"Solving unperturbed problem on N={spec.n}")
        base = self.solver.solve(spec)
        if not base.converged:
            logging.warning("Unperturbed solve hit max_iter; trial distances include its residual error")

        report = StabilityReport(
            eps1=eps1,
            eps2=eps2,
            lambda_uh=constants.lambda_uh,
            bound=bound,
            component_coefficients=((cx1, cx2), (cy1, cy2)),
            base_iterations=base.iterations,
            base_converged=base.converged,
        )

        def run_trial(index):
            rng = np.random.default_rng(np.random.SeedSequence([int(seed), index]))
            h1 = scaled_perturbation(spec, rng, eps1)
            h2 = scaled_perturbation(spec, rng, eps2)
            outcome = TrialOutcome(index=index, status="ok", h1=to_source(h1), h2=to_source(h2),
                                   bound=bound, bound_x=bound_x, bound_y=bound_y)
            pert = PerturbationSpec(eps1, eps2, h1, h2, trials, seed)
            try:
                result = perturbed_solve(spec, pert, self.solver)
            except (ConvergenceError, ExprEvalError) as e:
                outcome.status = "failed"
                outcome.error = str(e)
                return outcome
            outcome.iterations = result.iterations
            if not result.converged:
                outcome.status = "failed"
                outcome.error = f"max_iter reached after {result.iterations} iterations"
                return outcome

            outcome.d_x = (result.x - base.x).sup_norm()
            outcome.d_y = (result.y - base.y).sup_norm()
            outcome.d = outcome.d_x + outcome.d_y
            if bound > 0.0:
                outcome.ratio = outcome.d / bound
            else:
                outcome.ratio = 0.0 if outcome.d == 0.0 else math.inf
            if outcome.ratio > 1.0:
                outcome.status = "violation"
            return outcome

        with ThreadPoolExecutor(max_workers=self.workers) as executor:
            for idx, outcome in enumerate(executor.map(run_trial, range(trials))):
                report.trials.append(outcome)
                if outcome.status != "ok":
                    logging.warning(f"Stability trial {outcome.index}: {outcome.status} {outcome.error or ''}".rstrip())
                if progress_callback:
                    progress_callback(int((idx + 1) / max(trials, 1) * 100))

        logging.info(
            f"Stability check: {trials} trials, max ratio {report.max_ratio}, "
            f"{report.violations} violations, {report.failures} failures"
        )
        if status_callback:
            status_callback(f"Stability check {'passed' if report.passed else 'failed'}")
        return report


def uh_verify(spec, hyp, eps, trials=20, seed=0, tol=1e-10, max_iter=500, theta=1.0, workers=1, **callbacks):
    """Convenience wrapper around StabilityVerifier.verify"""
    return StabilityVerifier(tol, max_iter, theta, workers).verify(spec, hyp, eps, trials, seed, **callbacks)
