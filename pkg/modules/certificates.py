"""
Certificates Module
Computes the analytic constants of the existence (Leray-Schauder),
uniqueness (Banach) and Ulam-Hyers stability conditions and renders verdicts
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional

from modules.errors import DegenerateConstantError, DomainError
from modules.fracops import gamma
from modules.model import ORDER_FIELDS, check, power_sum

PASS = "pass"
FAIL = "fail"
NOT_APPLICABLE = "not-applicable"

DELTA_TOLERANCE = 1e-12
SWEEPABLE = ("a", "b", "lambda1", "lambda2") + ORDER_FIELDS

NOTE_STABILITY_CONDITION = (
    "Ulam-Hyers condition evaluated as A1 < 1, A2 < 1 and Delta > 0: the bound divides by "
    "(1 - A1)(1 - A2) and only gives an upper estimate when both factors are positive."
)
NOTE_Y_TERM_POINTS = "X2 and F2 evaluate every y_terms summand at (point - a)."
NOTE_F2_EXPONENT = (
    "F2 uses the composed order alpha1 + alpha2 + sigma in its y_terms sum, the same order F1 uses. "
    "The published F2 bound writes alpha2 + sigma there; the operator integrates f with order "
    "alpha1 + alpha2 + sigma at xi, so the published exponent is not used."
)
NOTE_GAMMA_DENOMINATORS = "Every moment bound (b - a)^e uses the denominator Gamma(e + 1)."
NOTE_TYPE_RANGE = "Type parameters beta1, beta2, q1, q2 are required to lie in (0, 1)."
NOTE_CAPUTO_LIMIT = "All fractional operators, Caputo included, use the lower limit a."
NOTE_BOUNDARY_FUNCTIONALS = (
    "Boundary functionals: Omega1 = -I^(a1+a2)f(b) + lambda1 I^a2 x(b) + sum mu I^(p1+p2+nu)g(eta) "
    "- lambda2 sum mu I^(p2+nu)y(eta); Omega2 = sum omega I^(a1+a2+sigma)f(xi) - lambda1 sum omega "
    "I^(a2+sigma)x(xi) - I^(p1+p2)g(b) + lambda2 I^p2 y(b). Solutions of the integral form then "
    "satisfy both conditions at b."
)
NOTE_EMPIRICAL = "Lipschitz constants come from lipschitz_probe: a sampled lower estimate, not a proven bound."

CERTIFICATE_NOTES = (
    NOTE_STABILITY_CONDITION,
    NOTE_Y_TERM_POINTS,
    NOTE_F2_EXPONENT,
    NOTE_GAMMA_DENOMINATORS,
    NOTE_TYPE_RANGE,
    NOTE_CAPUTO_LIMIT,
    NOTE_BOUNDARY_FUNCTIONALS,
)


def _check_nonnegative(owner, values):
    for name, value in values.items():
        if not (value >= 0.0):
            raise DomainError(f"{owner}.{name} must be non-negative, got {value!r}")


@dataclass(frozen=True)
class GrowthHypothesis:
    """|f| <= M1 + M2|x| + M3|y| and |g| <= Mbar1 + Mbar2|x| + Mbar3|y|"""

    M1: float
    M2: float
    M3: float
    Mbar1: float
    Mbar2: float
    Mbar3: float
    source: str = "user"

    def __post_init__(self):
        _check_nonnegative("growth", {k: getattr(self, k) for k in ("M1", "M2", "M3", "Mbar1", "Mbar2", "Mbar3")})


@dataclass(frozen=True)
class LipschitzHypothesis:
    """Joint Lipschitz constants of f, g and their sup norms along x = y = 0"""

    L1cal: float
    L2cal: float
    L1zero: float
    L2zero: float
    source: str = "user"

    def __post_init__(self):
        _check_nonnegative("lipschitz", {k: getattr(self, k) for k in ("L1cal", "L2cal", "L1zero", "L2zero")})


@dataclass(frozen=True)
class GrowthBounds:
    X1: float
    Y1: float
    F1: float
    G1: float
    X2: float
    Y2: float
    F2: float
    G2: float

    @property
    def F(self):
        return self.F1 + self.F2

    @property
    def G(self):
        return self.G1 + self.G2

    @property
    def X(self):
        return self.X1 + self.X2

    @property
    def Y(self):
        return self.Y1 + self.Y2


@dataclass(frozen=True)
class Verdict:
    status: str
    reasons: tuple = ()

    @property
    def passed(self):
        return self.status == PASS


class LeraySchauderCheck(NamedTuple):
    K1: float
    K2: float
    ls_bound: Optional[float]
    verdict: Verdict


class BanachCheck(NamedTuple):
    kappa: float
    radius: Optional[float]
    verdict: Verdict


class UlamHyersConstants(NamedTuple):
    A1: float
    B1: float
    C1: float
    A2: float
    B2: float
    C2: float
    Delta: float
    lambda_uh: Optional[float]
    verdict: Verdict

    def component_coefficients(self):
        """
        Coefficients of the per-component bounds

        Returns:
            ((cx1, cx2), (cy1, cy2)) with |x~ - x| <= cx1 eps1 + cx2 eps2
            and |y~ - y| <= cy1 eps1 + cy2 eps2
        """
        denominator = self.Delta * (1.0 - self.A1) * (1.0 - self.A2)
        x_coeffs = (self.C1 * (1.0 - self.A2) / denominator, self.B1 * self.C2 / denominator)
        y_coeffs = (self.B2 * self.C1 / denominator, self.C2 * (1.0 - self.A1) / denominator)
        return x_coeffs, y_coeffs

    def phi(self, eps):
        """Generalized stability function phi(eps) = lambda * eps, phi(0) = 0"""
        return self.lambda_uh * eps


class _BoundFactors:
    """Shared power/gamma factors of every bound"""

    def __init__(self, spec):
        self.spec = spec
        self.orders = spec.orders
        self.constants = spec.constants
        abs_lambda = abs(self.constants.Lambda)
        self.kx = abs(self.constants.phi1) / abs_lambda
        self.ky = abs(self.constants.phi4) / abs_lambda
        self.phi1 = abs(self.constants.phi1)
        self.phi2 = abs(self.constants.phi2)
        self.phi3 = abs(self.constants.phi3)
        self.phi4 = abs(self.constants.phi4)
        self.lam1 = abs(spec.lambda1)
        self.lam2 = abs(spec.lambda2)
        self.sum_x_order = spec.alpha1 + spec.alpha2
        self.sum_y_order = spec.p1 + spec.p2

    def moment(self, exponent):
        """(b - a)^e / Gamma(e + 1)"""
        return self.spec.length ** exponent / gamma(exponent + 1.0)

    def mu_sum(self, exponent):
        """sum |mu_i| (eta_i - a)^(e + nu_i) / Gamma(e + nu_i + 1)"""
        return power_sum(self.spec.x_terms, self.spec.a, exponent, absolute=True)

    def omega_sum(self, exponent):
        """sum |omega_j| (xi_j - a)^(e + sigma_j) / Gamma(e + sigma_j + 1)"""
        return power_sum(self.spec.y_terms, self.spec.a, exponent, absolute=True)


def growth_bounds(spec):
    """
    The eight operator bounds X1, Y1, F1, G1, X2, Y2, F2, G2

    Args:
        spec: Validated problem specification

    Returns:
        GrowthBounds
    """
    k = _BoundFactors(spec)
    sx, sy = k.sum_x_order, k.sum_y_order
    a2, p2 = spec.alpha2, spec.p2

    X1 = k.lam1 * (k.moment(a2) + k.kx * (k.phi4 * k.moment(a2) + k.phi2 * k.omega_sum(a2)))
    Y1 = k.lam2 * k.kx * (k.phi4 * k.mu_sum(p2) + k.phi2 * k.moment(p2))
    F1 = k.moment(sx) * (1.0 + k.kx * k.phi4) + k.kx * k.phi2 * k.omega_sum(sx)
    G1 = k.kx * (k.phi4 * k.mu_sum(sy) + k.phi2 * k.moment(sy))

    X2 = k.lam1 * k.ky * (k.phi1 * k.omega_sum(a2) + k.phi3 * k.moment(a2))
    Y2 = k.lam2 * (k.moment(p2) + k.ky * (k.phi1 * k.moment(p2) + k.phi3 * k.mu_sum(p2)))
    F2 = k.ky * (k.phi1 * k.omega_sum(sx) + k.phi3 * k.moment(sx))
    G2 = k.moment(sy) * (1.0 + k.ky * k.phi1) + k.ky * k.phi3 * k.mu_sum(sy)

    return GrowthBounds(X1, Y1, F1, G1, X2, Y2, F2, G2)


def leray_schauder_check(spec, hyp, bounds=None):
    """
    Existence condition K1 < 1, K2 < 1 and the a-priori bound on ||x|| + ||y||

    Returns:
        LeraySchauderCheck(K1, K2, ls_bound, verdict)
    """
    gb = bounds or growth_bounds(spec)
    K1 = gb.F * hyp.M2 + gb.G * hyp.Mbar2 + gb.X
    K2 = gb.F * hyp.M3 + gb.G * hyp.Mbar3 + gb.Y

    reasons = []
    if not K1 < 1.0:
        reasons.append(f"K1 = {K1:.15g} >= 1: existence growth condition on x fails")
    if not K2 < 1.0:
        reasons.append(f"K2 = {K2:.15g} >= 1: existence growth condition on y fails")
    if reasons:
        return LeraySchauderCheck(K1, K2, None, Verdict(FAIL, tuple(reasons)))

    ls_bound = (gb.F * hyp.M1 + gb.G * hyp.Mbar1) / min(1.0 - K1, 1.0 - K2)
    reason = f"K1 = {K1:.15g} < 1 and K2 = {K2:.15g} < 1: at least one solution exists"
    return LeraySchauderCheck(K1, K2, ls_bound, Verdict(PASS, (reason,)))


def contraction_constant(bounds, hyp):
    """kappa = (F1+F2) L1cal + (G1+G2) L2cal + (X1+X2) + (Y1+Y2)"""
    return bounds.F * hyp.L1cal + bounds.G * hyp.L2cal + bounds.X + bounds.Y


def banach_check(spec, hyp, bounds=None):
    """
    Uniqueness condition kappa < 1 and the invariant-ball radius

    Returns:
        BanachCheck(kappa, radius, verdict)
    """
    gb = bounds or growth_bounds(spec)
    kappa = contraction_constant(gb, hyp)
    if not kappa < 1.0:
        reason = f"kappa = {kappa:.15g} >= 1: operator is not shown to be a contraction"
        return BanachCheck(kappa, None, Verdict(FAIL, (reason,)))

    radius = (gb.F * hyp.L1zero + gb.G * hyp.L2zero) / (1.0 - kappa)
    reason = f"kappa = {kappa:.15g} < 1: the solution is unique and lies in the ball of radius {radius:.15g}"
    return BanachCheck(kappa, radius, Verdict(PASS, (reason,)))


def uh_constants(spec, hyp):
    """
    Ulam-Hyers constants A1, B1, C1, A2, B2, C2, Delta and lambda

    Raises:
        DegenerateConstantError when A1 or A2 equals 1 exactly

    Returns:
        UlamHyersConstants; lambda_uh is None unless the verdict passes
    """
    k = _BoundFactors(spec)
    sx, sy = k.sum_x_order, k.sum_y_order
    a2, p2 = spec.alpha2, spec.p2
    L1, L2 = hyp.L1cal, hyp.L2cal

    C1 = k.moment(sx)
    C2 = k.moment(sy)
    A1 = C1 * L1 + k.lam1 * k.moment(a2) + k.kx * (
        k.phi4 * k.mu_sum(sy) * L2 + k.phi2 * (k.omega_sum(sx) * L1 + k.lam1 * k.omega_sum(a2))
    )
    B1 = C1 * L1 + k.kx * (
        k.phi4 * (k.lam2 * k.mu_sum(p2) + k.mu_sum(sy) * L2) + k.phi2 * k.omega_sum(sx) * L1
    )
    A2 = C2 * L2 + k.lam2 * k.moment(p2) + k.ky * (
        k.phi1 * k.omega_sum(sx) * L1 + k.phi3 * (k.mu_sum(sy) * L2 + k.lam2 * k.mu_sum(p2))
    )
    B2 = C2 * L2 + k.ky * (
        k.phi1 * (k.lam1 * k.omega_sum(a2) + k.omega_sum(sx) * L1) + k.phi3 * k.mu_sum(sy) * L2
    )

    if A1 == 1.0 or A2 == 1.0:
        raise DegenerateConstantError(f"A1 = {A1!r}, A2 = {A2!r}: Delta is undefined")

    Delta = 1.0 - B1 * B2 / ((1.0 - A1) * (1.0 - A2))

    reasons = []
    if not A1 < 1.0:
        reasons.append(f"A1 = {A1:.15g} >= 1")
    if not A2 < 1.0:
        reasons.append(f"A2 = {A2:.15g} >= 1")
    if not Delta > DELTA_TOLERANCE:
        reasons.append(f"Delta = {Delta:.15g} is not positive")
    if reasons:
        return UlamHyersConstants(A1, B1, C1, A2, B2, C2, Delta, None, Verdict(FAIL, tuple(reasons)))

    lambda_uh = (C1 * (1.0 - A2) + B2 * C1 + C2 * (1.0 - A1) + B1 * C2) / (Delta * (1.0 - A1) * (1.0 - A2))
    reason = f"A1 = {A1:.15g}, A2 = {A2:.15g} < 1 and Delta = {Delta:.15g} > 0: Ulam-Hyers stable with lambda = {lambda_uh:.15g}"
    return UlamHyersConstants(A1, B1, C1, A2, B2, C2, Delta, lambda_uh, Verdict(PASS, (reason,)))


@dataclass
class Certificate:
    """Every constant and verdict computed for one problem specification"""

    spec: object
    growth: GrowthBounds
    existence: Optional[LeraySchauderCheck] = None
    uniqueness: Optional[BanachCheck] = None
    stability: Optional[UlamHyersConstants] = None
    growth_hypothesis: Optional[GrowthHypothesis] = None
    lipschitz_hypothesis: Optional[LipschitzHypothesis] = None
    verdicts: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def passes(self, name):
        verdict = self.verdicts.get(name)
        return verdict is not None and verdict.passed

    @property
    def kappa(self):
        return self.uniqueness.kappa if self.uniqueness else None

    def constants(self):
        """Flat name -> value mapping; None marks a value that does not apply"""
        sc = self.spec.constants
        orders = self.spec.orders
        values = {
            "phi1": sc.phi1, "phi2": sc.phi2, "phi3": sc.phi3, "phi4": sc.phi4, "Lambda": sc.Lambda,
            "gamma1": orders.gamma1, "gamma2": orders.gamma2,
            "delta1": orders.delta1, "delta2": orders.delta2,
        }
        values.update({name: getattr(self.growth, name) for name in ("X1", "Y1", "F1", "G1", "X2", "Y2", "F2", "G2")})
        ls = self.existence
        values.update(K1=ls and ls.K1, K2=ls and ls.K2, ls_bound=ls and ls.ls_bound)
        bc = self.uniqueness
        values.update(kappa=bc and bc.kappa, radius=bc and bc.radius)
        uh = self.stability
        for name in ("A1", "B1", "C1", "A2", "B2", "C2", "Delta", "lambda_uh"):
            values[name] = getattr(uh, name) if uh else None
        if uh is not None and uh.verdict.passed:
            (cx1, cx2), (cy1, cy2) = uh.component_coefficients()
            values.update(uh_x_coeff_eps1=cx1, uh_x_coeff_eps2=cx2, uh_y_coeff_eps1=cy1, uh_y_coeff_eps2=cy2)
        return values


def certify(spec, growth=None, lipschitz=None):
    """
    Compute all constants and the three verdicts

    Args:
        spec: Validated problem specification
        growth: GrowthHypothesis or None (existence verdict not applicable)
        lipschitz: LipschitzHypothesis or None (uniqueness and stability not applicable)

    Returns:
        Certificate
    """
    bounds = growth_bounds(spec)
    cert = Certificate(spec=spec, growth=bounds, growth_hypothesis=growth, lipschitz_hypothesis=lipschitz)
    cert.notes = list(CERTIFICATE_NOTES)

    if growth is None:
        cert.verdicts["existence"] = Verdict(NOT_APPLICABLE, ("no growth hypothesis supplied",))
    else:
        cert.existence = leray_schauder_check(spec, growth, bounds)
        cert.verdicts["existence"] = cert.existence.verdict

    if lipschitz is None:
        missing = Verdict(NOT_APPLICABLE, ("no lipschitz hypothesis supplied",))
        cert.verdicts["uniqueness"] = missing
        cert.verdicts["ulam_hyers"] = missing
    else:
        cert.uniqueness = banach_check(spec, lipschitz, bounds)
        cert.verdicts["uniqueness"] = cert.uniqueness.verdict
        try:
            cert.stability = uh_constants(spec, lipschitz)
            cert.verdicts["ulam_hyers"] = cert.stability.verdict
        except DegenerateConstantError as e:
            cert.verdicts["ulam_hyers"] = Verdict(FAIL, (str(e),))
        if lipschitz.source == "empirical":
            cert.notes.append(NOTE_EMPIRICAL)

    for name, verdict in cert.verdicts.items():
        logging.info(f"Certificate verdict {name}: {verdict.status}")
    return cert


class ParameterSweep:
    """Handles certifying a family of specifications along one scalar parameter"""

    def __init__(self, workers=1):
        self.workers = max(1, int(workers))

    def run(self, spec, parameter, values, growth=None, lipschitz=None,
            progress_callback=None, status_callback=None):
        """
        Certify spec with `parameter` replaced by each of `values`

        Args:
            spec: Base problem specification
            parameter: One of SWEEPABLE
            values: Sequence of parameter values
            growth, lipschitz: Hypotheses applied at every point
            progress_callback: Function to call with progress updates (0-100)
            status_callback: Function to call with status messages

        Returns:
            List of row dictionaries in the order of `values`
        """
        if parameter not in SWEEPABLE:
            raise DomainError(f"cannot sweep {parameter!r}; choose one of {', '.join(SWEEPABLE)}")
        values = [float(v) for v in values]
        if status_callback:
            status_callback(f"Sweeping {parameter} over {len(values)} values")

        def certify_point(value):
            point = replace(spec, **{parameter: value})
            problems = check(point)
            if problems:
                return {"parameter": parameter, "value": value, "valid": False, "diagnostics": problems}
            cert = certify(point, growth, lipschitz)
            row = {"parameter": parameter, "value": value, "valid": True}
            row.update({k: cert.constants()[k] for k in ("Lambda", "K1", "K2", "kappa", "lambda_uh")})
            row["verdicts"] = {name: v.status for name, v in cert.verdicts.items()}
            return row

        rows = []
        with ThreadPoolExecutor(max_workers=self.workers) as executor:
            for idx, row in enumerate(executor.map(certify_point, values)):
                rows.append(row)
                if progress_callback:
                    progress_callback(int((idx + 1) / len(values) * 100))
        logging.info(f"Sweep of {parameter} finished: {len(rows)} points")
        return rows
