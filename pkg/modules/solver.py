"""
Solver Module
Fixed-point operator of the integral form, Picard iteration, direct linear
solve for t-only right-hand sides, and residual verification
"""

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg
from scipy.linalg import lapack

from modules.errors import (
    ConditioningError,
    ConvergenceError,
    DivergenceError,
    DomainError,
    ExprEvalError,
    NonlinearProblemError,
    UncertifiedError,
)
from modules.exprlang import evaluate, free_variables
from modules.fracops import (
    FracOrder,
    GridFunction,
    gamma,
    grid_nodes,
    hilfer_derivative,
    hilfer_power,
    integral_matrix,
    integral_weights_at,
    power_values,
    rl_integral,
    rl_integral_at,
)

RESIDUAL_TRIM = 0.02
MAX_LINEAR_N = 20000
RCOND_LIMIT = 1e-13
DIVERGENCE_WINDOW = 5
DIVERGENCE_GROWTH = 10.0
CONTRACTION_SLACK = 0.1


@dataclass(frozen=True)
class Residuals:
    ode1: float
    ode2: float
    bc_xa: float
    bc_xb: float
    bc_ya: float
    bc_yb: float

    def as_dict(self):
        return {name: getattr(self, name) for name in ("ode1", "ode2", "bc_xa", "bc_xb", "bc_ya", "bc_yb")}


@dataclass
class SolveResult:
    """Solution samples plus the iteration record of one solve"""

    x: GridFunction
    y: GridFunction
    iterations: int
    error_trace: tuple
    contraction_ratios: tuple
    converged: bool
    method: str = "picard"
    status: str = "converged"
    residuals: Optional[Residuals] = None
    certified: bool = False
    kappa: Optional[float] = None
    contraction_violations: tuple = field(default_factory=tuple)

    @property
    def norm(self):
        """||x|| + ||y|| in the sup norm"""
        return self.x.sup_norm() + self.y.sup_norm()


def sample_nonlinearity(expr, t, x, y):
    """Evaluate f or g along the grid, pinning evaluation errors to the offending t"""
    try:
        return evaluate(expr, t, x, y)
    except ExprEvalError as e:
        if e.index is not None and e.t is None and np.ndim(t) > 0:
            raise e.at(float(t[e.index])) from e
        raise


def _kernels(spec, t):
    """(t-a)^(gamma1+alpha2-1)/Gamma(gamma1+alpha2) and the y counterpart"""
    orders = spec.orders
    ex = orders.gamma1 + spec.alpha2 - 1.0
    ey = orders.delta1 + spec.p2 - 1.0
    s = t - spec.a
    return s ** ex / gamma(ex + 1.0), s ** ey / gamma(ey + 1.0)


def _boundary_functionals(spec, F, G, x, y):
    """Omega1, Omega2 of the current iterate"""
    sx = spec.alpha1 + spec.alpha2
    sy = spec.p1 + spec.p2
    b = spec.b
    omega1 = -rl_integral_at(F, sx, b) + spec.lambda1 * rl_integral_at(x, spec.alpha2, b)
    for term in spec.x_terms:
        omega1 += term.coeff * (
            rl_integral_at(G, sy + term.order, term.point)
            - spec.lambda2 * rl_integral_at(y, spec.p2 + term.order, term.point)
        )
    omega2 = -rl_integral_at(G, sy, b) + spec.lambda2 * rl_integral_at(y, spec.p2, b)
    for term in spec.y_terms:
        omega2 += term.coeff * (
            rl_integral_at(F, sx + term.order, term.point)
            - spec.lambda1 * rl_integral_at(x, spec.alpha2 + term.order, term.point)
        )
    return omega1, omega2


def _boundary_constants(spec, F, G, x, y):
    """c0, d0 multiplying the two boundary kernels"""
    sc = spec.constants
    omega1, omega2 = _boundary_functionals(spec, F, G, x, y)
    c0 = (sc.phi4 * omega1 + sc.phi2 * omega2) / sc.Lambda
    d0 = (sc.phi1 * omega2 + sc.phi3 * omega1) / sc.Lambda
    return c0, d0


def _operator_values(spec, x, y):
    """Raw arrays of A1(x, y) and A2(x, y)"""
    x.require_same_grid(y)
    if x.n != spec.n or x.a != spec.a or x.b != spec.b:
        raise DomainError(f"iterate grid N={x.n} on [{x.a}, {x.b}] does not match the problem grid N={spec.n}")
    t = x.t
    F = x.with_values(sample_nonlinearity(spec.f, t, x.values, y.values))
    G = x.with_values(sample_nonlinearity(spec.g, t, x.values, y.values))

    c0, d0 = _boundary_constants(spec, F, G, x, y)
    kx, ky = _kernels(spec, t)

    ax = rl_integral(F, spec.alpha1 + spec.alpha2).values - spec.lambda1 * rl_integral(x, spec.alpha2).values + c0 * kx
    ay = rl_integral(G, spec.p1 + spec.p2).values - spec.lambda2 * rl_integral(y, spec.p2).values + d0 * ky
    return ax, ay


def apply_A(spec, x, y):
    """Both components of the fixed-point operator"""
    ax, ay = _operator_values(spec, x, y)
    return x.with_values(ax), y.with_values(ay)


def apply_A1(spec, x, y):
    """
    x-component of the fixed-point operator

        I^(a1+a2) f - lambda1 I^a2 x + (t-a)^(gamma1+a2-1)/Gamma(gamma1+a2) * c0
    """
    return apply_A(spec, x, y)[0]


def apply_A2(spec, x, y):
    """y-component of the fixed-point operator"""
    return apply_A(spec, x, y)[1]


def _diverging(trace):
    if len(trace) <= DIVERGENCE_WINDOW:
        return False
    window = trace[-(DIVERGENCE_WINDOW + 1):]
    growing = all(later > earlier for earlier, later in zip(window, window[1:]))
    return growing and window[-1] >= DIVERGENCE_GROWTH * window[0]


def contraction_ratios(trace):
    return tuple(later / earlier for earlier, later in zip(trace, trace[1:]) if earlier > 0.0)


class PicardSolver:
    """Handles Picard iteration of the fixed-point operator from (0, 0)"""

    def __init__(self, tol=1e-10, max_iter=500, theta=1.0):
        if not (tol > 0.0):
            raise DomainError(f"tolerance must be positive, got {tol!r}")
        if int(max_iter) < 1:
            raise DomainError(f"max_iter must be at least 1, got {max_iter!r}")
        if not (0.0 < theta <= 1.0):
            raise DomainError(f"damping theta must lie in (0, 1], got {theta!r}")
        self.tol = float(tol)
        self.max_iter = int(max_iter)
        self.theta = float(theta)

    def solve(self, spec, certificate=None, require_certificate=False,
              progress_callback=None, status_callback=None):
        """
        Iterate (x, y) <- A(x, y) until the relative sup-norm update drops below tol

        Args:
            spec: Validated problem specification
            certificate: Optional Certificate; a passing uniqueness verdict
                enables the contraction-ratio cross-check
            require_certificate: Refuse to run without a passing uniqueness verdict
            progress_callback: Function to call with progress updates (0-100)
            status_callback: Function to call with status messages

        Returns:
            SolveResult (converged False when max_iter was reached)

        Raises:
            DivergenceError when the update grows tenfold over five iterations
        """
        certified = certificate is not None and certificate.passes("uniqueness")
        kappa = certificate.kappa if certified else None
        if require_certificate and not certified:
            raise UncertifiedError("certified solve requested but the contraction certificate does not pass")

        x = GridFunction.zeros(spec.a, spec.b, spec.n)
        y = GridFunction.zeros(spec.a, spec.b, spec.n)
        trace = []
        converged = False
        if status_callback:
            status_callback(f"Picard iteration on N={spec.n} (tol={self.tol:g}, max_iter={self.max_iter})")

        for k in range(1, self.max_iter + 1):
            try:
                ax, ay = _operator_values(spec, x, y)
            except ExprEvalError as e:
                if trace and e.reason.startswith("non-finite"):
                    raise DivergenceError(f"iterates overflowed at iteration {k}: {e}", trace) from e
                raise
            if self.theta < 1.0:
                ax = (1.0 - self.theta) * x.values + self.theta * ax
                ay = (1.0 - self.theta) * y.values + self.theta * ay
            if not (np.all(np.isfinite(ax)) and np.all(np.isfinite(ay))):
                raise DivergenceError(f"iterates became non-finite at iteration {k}", trace)

            delta = float(np.max(np.abs(ax - x.values)) + np.max(np.abs(ay - y.values)))
            scale = 1.0 + x.sup_norm() + y.sup_norm()
            trace.append(delta)
            x, y = x.with_values(ax), y.with_values(ay)

            if progress_callback:
                progress_callback(int(k / self.max_iter * 100))
            if delta <= self.tol * scale:
                converged = True
                break
            if _diverging(trace):
                logging.error(f"Picard iteration diverging at iteration {k}: delta = {delta:.3e}")
                raise DivergenceError(
                    f"update grew {DIVERGENCE_GROWTH:g}x over {DIVERGENCE_WINDOW} iterations (delta = {delta:.3e})",
                    trace,
                )

        ratios = contraction_ratios(trace)
        violations = ()
        if kappa is not None:
            limit = kappa + CONTRACTION_SLACK
            violations = tuple(
                f"ratio {r:.6g} exceeds kappa + {CONTRACTION_SLACK:g} = {limit:.6g}"
                for r in ratios[-DIVERGENCE_WINDOW:] if r > limit
            )
            for message in violations:
                logging.warning(f"Contraction check: {message}")

        result = SolveResult(
            x=x,
            y=y,
            iterations=len(trace),
            error_trace=tuple(trace),
            contraction_ratios=ratios,
            converged=converged,
            method="picard",
            status="converged" if converged else "max_iter",
            certified=certified,
            kappa=kappa,
            contraction_violations=violations,
        )
        result.residuals = residual_check(spec, result)
        logging.info(f"Picard finished: status={result.status}, iterations={result.iterations}, last delta={trace[-1]:.3e}")
        if status_callback:
            status_callback(f"Picard {result.status} after {result.iterations} iterations")
        return result


def picard_solve(spec, tol=1e-10, max_iter=500, theta=1.0, certificate=None, strict=False, **callbacks):
    """
    Picard iteration from (0, 0)

    With strict=True a run that hits max_iter raises ConvergenceError instead of
    returning an unconverged result.
    """
    result = PicardSolver(tol, max_iter, theta).solve(spec, certificate=certificate, **callbacks)
    if strict and not result.converged:
        raise ConvergenceError(
            f"Picard iteration did not converge in {max_iter} iterations, last delta {result.error_trace[-1]:.1e}",
            result.error_trace,
        )
    return result


def _require_t_only(spec):
    for name in ("f", "g"):
        extra = free_variables(getattr(spec, name)) - {"t"}
        if extra:
            raise NonlinearProblemError(
                f"linear method requires t-only f,g ({name} uses {', '.join(sorted(extra))})"
            )


def linear_solve(spec):
    """
    Solve the linear integral form as one dense system in 2(N+1) unknowns

    The matrix holds the quadrature weights of lambda1 I^a2 x and
    lambda2 I^p2 y plus rank-one boundary blocks from Omega1, Omega2.
    Elimination uses LU with partial pivoting.

    Raises:
        NonlinearProblemError when f or g depends on x or y
        ConditioningError when the assembled matrix is numerically singular
    """
    _require_t_only(spec)
    n = spec.n
    if n > MAX_LINEAR_N:
        raise DomainError(f"linear method supports N <= {MAX_LINEAR_N}, got N = {n}")

    a, b = spec.a, spec.b
    t = grid_nodes(a, b, n)
    zeros = np.zeros_like(t)
    H1 = GridFunction(a, b, sample_nonlinearity(spec.f, t, zeros, zeros))
    H2 = GridFunction(a, b, sample_nonlinearity(spec.g, t, zeros, zeros))
    sx, sy = spec.alpha1 + spec.alpha2, spec.p1 + spec.p2
    sc = spec.constants

    def weights(order, point):
        return integral_weights_at(a, b, n, order, point)

    # Omega_i = omega_h + omega_x @ X + omega_y @ Y
    omega1_h = -rl_integral_at(H1, sx, b)
    omega1_x = spec.lambda1 * weights(spec.alpha2, b)
    omega1_y = np.zeros(n + 1)
    for term in spec.x_terms:
        omega1_h += term.coeff * rl_integral_at(H2, sy + term.order, term.point)
        omega1_y -= spec.lambda2 * term.coeff * weights(spec.p2 + term.order, term.point)

    omega2_h = -rl_integral_at(H2, sy, b)
    omega2_x = np.zeros(n + 1)
    omega2_y = spec.lambda2 * weights(spec.p2, b)
    for term in spec.y_terms:
        omega2_h += term.coeff * rl_integral_at(H1, sx + term.order, term.point)
        omega2_x -= spec.lambda1 * term.coeff * weights(spec.alpha2 + term.order, term.point)

    kx, ky = _kernels(spec, t)
    c_h = (sc.phi4 * omega1_h + sc.phi2 * omega2_h) / sc.Lambda
    c_x = (sc.phi4 * omega1_x + sc.phi2 * omega2_x) / sc.Lambda
    c_y = (sc.phi4 * omega1_y + sc.phi2 * omega2_y) / sc.Lambda
    d_h = (sc.phi1 * omega2_h + sc.phi3 * omega1_h) / sc.Lambda
    d_x = (sc.phi1 * omega2_x + sc.phi3 * omega1_x) / sc.Lambda
    d_y = (sc.phi1 * omega2_y + sc.phi3 * omega1_y) / sc.Lambda

    size = n + 1
    matrix = np.eye(2 * size)
    matrix[:size, :size] += spec.lambda1 * integral_matrix(a, b, n, spec.alpha2) - np.outer(kx, c_x)
    matrix[:size, size:] -= np.outer(kx, c_y)
    matrix[size:, :size] -= np.outer(ky, d_x)
    matrix[size:, size:] += spec.lambda2 * integral_matrix(a, b, n, spec.p2) - np.outer(ky, d_y)

    rhs = np.concatenate([
        rl_integral(H1, sx).values + c_h * kx,
        rl_integral(H2, sy).values + d_h * ky,
    ])

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(matrix)
    rcond, _ = lapack.dgecon(lu, np.linalg.norm(matrix, 1), norm="1")
    if not rcond > RCOND_LIMIT:
        condition = math.inf if rcond == 0.0 else 1.0 / rcond
        logging.error(f"Linear solve rejected: condition number {condition:.3e}")
        raise ConditioningError(condition)

    solution = scipy.linalg.lu_solve((lu, piv), rhs)
    result = SolveResult(
        x=GridFunction(a, b, solution[:size]),
        y=GridFunction(a, b, solution[size:]),
        iterations=1,
        error_trace=(),
        contraction_ratios=(),
        converged=True,
        method="linear",
        status="converged",
    )
    result.residuals = residual_check(spec, result)
    logging.info(f"Linear solve finished on N={n}, estimated condition number {1.0 / rcond:.3e}")
    return result


def _interior(n):
    skip = max(1, math.ceil(RESIDUAL_TRIM * n))
    return slice(skip, n - skip + 1)


def _langevin_residual(u, coeff, kernel, mu, outer, inner, lam, forcing):
    """
    D_outer (D_inner + lam) u - forcing, with u = smooth part + coeff * kernel

    The kernel (t-a)^(mu-1)/Gamma(mu) is removed before the grid composition
    and its exact image is added back: D_inner maps it onto the kernel of
    D_outer, so only the lam term survives.
    """
    smooth = u.with_values(u.values - coeff * kernel)
    middle = hilfer_derivative(smooth, inner) + lam * smooth
    r = hilfer_derivative(middle, outer).values - forcing

    if coeff == 0.0:
        return r
    inner_coeff, inner_mu = hilfer_power(mu, inner)
    for scale, index in ((inner_coeff, inner_mu), (lam, mu)):
        if scale == 0.0:
            continue
        outer_coeff, image_mu = hilfer_power(index, outer)
        if outer_coeff != 0.0:
            r = r + coeff * scale * outer_coeff * power_values(u.t, u.a, image_mu)
    return r


def residual_check(spec, result):
    """
    Residuals of the differential form and of the four boundary conditions

    ODE residuals are sup norms over interior nodes, skipping the first and last
    2% of cells. The c0 and d0 kernel components of the solution are taken out
    before composing the Hilfer derivatives and handled by the exact power rule.

    Returns:
        Residuals
    """
    x, y = result.x, result.y
    t = x.t
    F = x.with_values(sample_nonlinearity(spec.f, t, x.values, y.values))
    G = x.with_values(sample_nonlinearity(spec.g, t, x.values, y.values))
    c0, d0 = _boundary_constants(spec, F, G, x, y)
    kx, ky = _kernels(spec, t)
    orders = spec.orders

    r1 = _langevin_residual(
        x, c0, kx, orders.gamma1 + spec.alpha2,
        FracOrder(spec.alpha1, spec.beta1), FracOrder(spec.alpha2, spec.beta2), spec.lambda1, F.values,
    )
    r2 = _langevin_residual(
        y, d0, ky, orders.delta1 + spec.p2,
        FracOrder(spec.p1, spec.q1), FracOrder(spec.p2, spec.q2), spec.lambda2, G.values,
    )
    interior = _interior(x.n)

    x_target = sum(term.coeff * rl_integral_at(y, term.order, term.point) for term in spec.x_terms)
    y_target = sum(term.coeff * rl_integral_at(x, term.order, term.point) for term in spec.y_terms)
    return Residuals(
        ode1=float(np.max(np.abs(r1[interior]))),
        ode2=float(np.max(np.abs(r2[interior]))),
        bc_xa=abs(float(x.values[0])),
        bc_xb=abs(float(x.values[-1]) - x_target),
        bc_ya=abs(float(y.values[0])),
        bc_yb=abs(float(y.values[-1]) - y_target),
    )
