"""
Problem Model Module
Problem instances, validation, derived orders and the structural constants
phi1..phi4, Lambda of the coupled boundary-value problem
"""

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Tuple

from modules.errors import SingularProblemError, ValidationError
from modules.exprlang import Expr
from modules.fracops import gamma

SINGULARITY_TOLERANCE = 1e-12
ORDER_FIELDS = ("alpha1", "beta1", "alpha2", "beta2", "p1", "q1", "p2", "q2")


@dataclass(frozen=True)
class BoundaryTerm:
    """One summand coeff * I^order(u)(point) of a nonlocal boundary condition"""

    coeff: float
    order: float
    point: float


@dataclass(frozen=True)
class DerivedOrders:
    gamma1: float
    gamma2: float
    delta1: float
    delta2: float


@dataclass(frozen=True)
class StructuralConstants:
    phi1: float
    phi2: float
    phi3: float
    phi4: float
    Lambda: float


@dataclass(frozen=True)
class ProblemSpec:
    """
    Coupled Hilfer-Langevin boundary-value problem

        D^{alpha1,beta1}(D^{alpha2,beta2} + lambda1) x = f(t, x, y)
        D^{p1,q1}(D^{p2,q2} + lambda2) y = g(t, x, y)
        x(a) = 0, x(b) = sum coeff_i I^{order_i} y(point_i)   (x_terms)
        y(a) = 0, y(b) = sum coeff_j I^{order_j} x(point_j)   (y_terms)
    """

    a: float
    b: float
    alpha1: float
    beta1: float
    alpha2: float
    beta2: float
    p1: float
    q1: float
    p2: float
    q2: float
    lambda1: float
    lambda2: float
    f: Expr
    g: Expr
    x_terms: Tuple[BoundaryTerm, ...] = ()
    y_terms: Tuple[BoundaryTerm, ...] = ()
    n: int = 400

    def __post_init__(self):
        object.__setattr__(self, "x_terms", tuple(self.x_terms))
        object.__setattr__(self, "y_terms", tuple(self.y_terms))

    @cached_property
    def orders(self):
        return derived_orders(self)

    @cached_property
    def constants(self):
        return structural_constants(self)

    @property
    def length(self):
        return self.b - self.a


def derived_orders(spec):
    """gamma_i = alpha_i + beta_i - alpha_i beta_i and delta_i = p_i + q_i - p_i q_i"""
    return DerivedOrders(
        gamma1=spec.alpha1 + spec.beta1 - spec.alpha1 * spec.beta1,
        gamma2=spec.alpha2 + spec.beta2 - spec.alpha2 * spec.beta2,
        delta1=spec.p1 + spec.q1 - spec.p1 * spec.q1,
        delta2=spec.p2 + spec.q2 - spec.p2 * spec.q2,
    )


def power_sum(terms, a, shift, absolute=False):
    """
    Sum of c_i (point_i - a)^e_i / Gamma(e_i + 1) with e_i = shift + order_i

    Args:
        terms: Boundary terms
        a: Left endpoint
        shift: Exponent added to every term order
        absolute: Use |c_i| instead of c_i
    """
    total = 0.0
    for term in terms:
        exponent = shift + term.order
        coeff = abs(term.coeff) if absolute else term.coeff
        total += coeff * (term.point - a) ** exponent / gamma(exponent + 1.0)
    return total


def structural_constants(spec):
    """
    phi1..phi4 and Lambda = phi1 phi4 - phi2 phi3

    Raises:
        SingularProblemError when |Lambda| is negligible relative to its terms
    """
    orders = derived_orders(spec)
    x_kernel = orders.gamma1 + spec.alpha2 - 1.0
    y_kernel = orders.delta1 + spec.p2 - 1.0

    phi1 = spec.length ** x_kernel / gamma(x_kernel + 1.0)
    phi2 = power_sum(spec.x_terms, spec.a, y_kernel)
    phi3 = power_sum(spec.y_terms, spec.a, x_kernel)
    phi4 = spec.length ** y_kernel / gamma(y_kernel + 1.0)
    Lambda = phi1 * phi4 - phi2 * phi3

    scale = abs(phi1 * phi4) + abs(phi2 * phi3) + 1.0
    if abs(Lambda) < SINGULARITY_TOLERANCE * scale:
        raise SingularProblemError(
            f"Lambda = phi1*phi4 - phi2*phi3 = {Lambda:.6e} is singular "
            f"(phi1={phi1:.6e}, phi2={phi2:.6e}, phi3={phi3:.6e}, phi4={phi4:.6e})"
        )
    return StructuralConstants(phi1, phi2, phi3, phi4, Lambda)


def _is_real(value):
    return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)


def _check_terms(name, terms, a, b, problems):
    for i, term in enumerate(terms):
        label = f"{name}[{i}]"
        if not _is_real(term.coeff):
            problems.append(f"{label}.coeff = {term.coeff!r} must be a finite real")
        if not (_is_real(term.order) and term.order > 0):
            problems.append(f"{label}.order = {term.order!r} must be positive")
        if not _is_real(term.point):
            problems.append(f"{label}.point = {term.point!r} must be a finite real")
        elif _is_real(a) and _is_real(b) and not (a <= term.point <= b):
            problems.append(f"{label}.point = {term.point!r} outside [a, b] = [{a}, {b}]")


def check(spec):
    """
    Collect every violated constraint of a problem specification

    Returns:
        List of diagnostic strings, empty when the specification is valid
    """
    problems = []

    if not (_is_real(spec.a) and _is_real(spec.b)):
        problems.append(f"interval [a, b] = [{spec.a!r}, {spec.b!r}] must be finite")
    else:
        if spec.a < 0:
            problems.append(f"a = {spec.a} must be >= 0")
        if spec.b <= spec.a:
            problems.append(f"b = {spec.b} must exceed a = {spec.a}")

    orders_ok = True
    for name in ORDER_FIELDS:
        value = getattr(spec, name)
        if not (_is_real(value) and 0.0 < value < 1.0):
            problems.append(f"{name} = {value!r} must lie in (0, 1)")
            orders_ok = False

    if orders_ok:
        for first, second in (("alpha1", "alpha2"), ("p1", "p2")):
            total = getattr(spec, first) + getattr(spec, second)
            if not (1.0 < total <= 2.0):
                problems.append(f"{first} + {second} = {total} must satisfy 1 < {first} + {second} <= 2")

    for name in ("lambda1", "lambda2"):
        if not _is_real(getattr(spec, name)):
            problems.append(f"{name} = {getattr(spec, name)!r} must be a finite real")

    for name in ("f", "g"):
        if not isinstance(getattr(spec, name), Expr):
            problems.append(f"{name} must be a parsed expression")

    _check_terms("x_terms", spec.x_terms, spec.a, spec.b, problems)
    _check_terms("y_terms", spec.y_terms, spec.a, spec.b, problems)

    if isinstance(spec.n, bool) or not isinstance(spec.n, int) or spec.n < 2:
        problems.append(f"N = {spec.n!r} must be an integer >= 2")

    if orders_ok:
        orders = derived_orders(spec)
        if not orders.gamma1 + spec.alpha2 > 1.0:
            problems.append(f"gamma1 + alpha2 = {orders.gamma1 + spec.alpha2} must exceed 1")
        if not orders.delta1 + spec.p2 > 1.0:
            problems.append(f"delta1 + p2 = {orders.delta1 + spec.p2} must exceed 1")

    if not problems:
        try:
            structural_constants(spec)
        except SingularProblemError as e:
            problems.append(str(e))
    return problems


def validate(spec):
    """
    Validate a problem specification

    Returns:
        The same specification (derived orders available as spec.orders)

    Raises:
        ValidationError listing every violated constraint
    """
    problems = check(spec)
    if problems:
        raise ValidationError(problems)
    return spec
