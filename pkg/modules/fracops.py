"""
Fractional Operators Module
Gamma function, uniform-grid functions, Riemann-Liouville integrals and
Riemann-Liouville / Caputo / Hilfer derivatives of sampled functions
"""

import math
from dataclasses import dataclass

import numpy as np

from modules.errors import DomainError

# Lanczos approximation, g = 7, nine coefficients
LANCZOS_G = 7
LANCZOS_COEFFICIENTS = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)

# Relative tolerance for snapping an evaluation point onto a grid node
NODE_SNAP = 1e-9

# Power indices this close to the type order gamma are treated as the kernel
KERNEL_MATCH = 1e-12


def gamma(z):
    """
    Gamma function for positive real arguments

    Args:
        z: Positive finite real

    Returns:
        Gamma(z) with relative error below 1e-12
    """
    z = float(z)
    if not math.isfinite(z) or z <= 0.0:
        raise DomainError(f"gamma requires a positive finite argument, got {z!r}")
    if z < 0.5:
        # reflection keeps the series in its accurate half-plane
        return math.pi / (math.sin(math.pi * z) * gamma(1.0 - z))

    z -= 1.0
    series = LANCZOS_COEFFICIENTS[0]
    for i in range(1, LANCZOS_G + 2):
        series += LANCZOS_COEFFICIENTS[i] / (z + i)
    t = z + LANCZOS_G + 0.5
    try:
        half = t ** (0.5 * (z + 0.5))
        value = math.sqrt(2.0 * math.pi) * half * (half * math.exp(-t)) * series
    except OverflowError:
        raise DomainError(f"gamma({z + 1.0!r}) overflows double precision")
    if not math.isfinite(value):
        raise DomainError(f"gamma({z + 1.0!r}) overflows double precision")
    return value


@dataclass(frozen=True)
class FracOrder:
    """Order alpha in (0, 1) and type parameter beta in [0, 1] of a Hilfer derivative"""

    alpha: float
    beta: float = 0.0

    def __post_init__(self):
        _check_unit_order(self.alpha)
        if not (0.0 <= self.beta <= 1.0):
            raise DomainError(f"type parameter beta must lie in [0, 1], got {self.beta!r}")

    @property
    def gamma(self):
        """Derived order alpha + beta - alpha*beta"""
        return self.alpha + self.beta - self.alpha * self.beta


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Samples of a real function at t_k = a + k(b-a)/N, k = 0..N"""

    a: float
    b: float
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 1:
            raise DomainError("grid values must be one-dimensional")
        if not (math.isfinite(self.a) and math.isfinite(self.b) and self.b > self.a):
            raise DomainError(f"grid needs finite a < b, got [{self.a!r}, {self.b!r}]")
        if values.size < 3:
            raise DomainError(f"grid needs N >= 2, got N = {values.size - 1}")
        if not np.all(np.isfinite(values)):
            bad = int(np.flatnonzero(~np.isfinite(values))[0])
            raise DomainError(f"grid value at index {bad} is not finite")
        values.setflags(write=False)
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "b", float(self.b))
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, fn, a, b, n):
        """Sample a vectorized callable on the grid"""
        t = grid_nodes(a, b, n)
        return cls(a, b, np.broadcast_to(np.asarray(fn(t), dtype=float), t.shape))

    @classmethod
    def zeros(cls, a, b, n):
        return cls(a, b, np.zeros(n + 1))

    @property
    def n(self):
        return self.values.size - 1

    @property
    def h(self):
        return (self.b - self.a) / self.n

    @property
    def t(self):
        return grid_nodes(self.a, self.b, self.n)

    def same_grid(self, other):
        return self.a == other.a and self.b == other.b and self.n == other.n

    def require_same_grid(self, other):
        if not self.same_grid(other):
            raise DomainError(
                f"grid mismatch: [{self.a}, {self.b}] N={self.n} vs [{other.a}, {other.b}] N={other.n}"
            )

    def with_values(self, values):
        return GridFunction(self.a, self.b, values)

    def sup_norm(self):
        return float(np.max(np.abs(self.values)))

    def __add__(self, other):
        if isinstance(other, GridFunction):
            self.require_same_grid(other)
            return self.with_values(self.values + other.values)
        return self.with_values(self.values + float(other))

    def __sub__(self, other):
        if isinstance(other, GridFunction):
            self.require_same_grid(other)
            return self.with_values(self.values - other.values)
        return self.with_values(self.values - float(other))

    def __mul__(self, scalar):
        return self.with_values(self.values * float(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return self.with_values(-self.values)


def grid_nodes(a, b, n):
    """Uniform nodes a + k(b-a)/n, k = 0..n, with the last node exactly b"""
    t = a + (b - a) * (np.arange(n + 1) / n)
    t[-1] = b
    return t


def _check_positive_order(alpha):
    if not (math.isfinite(alpha) and alpha > 0.0):
        raise DomainError(f"integral order must be positive, got {alpha!r}")


def _check_unit_order(alpha):
    if not (0.0 < alpha < 1.0):
        raise DomainError(f"derivative order must lie in (0, 1), got {alpha!r}")


def _forward_power_difference(d, p):
    """(d+1)^p - d^p for d > 0, without cancellation for large d"""
    return d ** p * np.expm1(p * np.log1p(1.0 / d))


def _grid_weights(alpha, n):
    """
    Product-trapezoidal weights in units of h^alpha / Gamma(alpha + 2)

    Returns:
        Tuple (start, lag): start[k] weights f_0 in the value at t_k,
        lag[m] weights f_j with k - j = m >= 0 for j >= 1
    """
    p = alpha + 1.0
    m = np.arange(1, n, dtype=float)
    lag = np.empty(n)
    lag[0] = 1.0
    if n > 1:
        forward = np.empty(n)
        forward[0] = 1.0
        forward[1:] = _forward_power_difference(m, p)
        lag[1:] = forward[1:] - forward[:-1]

    start = np.zeros(n + 1)
    start[1] = alpha
    if n > 1:
        k = np.arange(2, n + 1, dtype=float)
        start[2:] = k ** alpha * (alpha + (k - 1.0) * np.expm1(alpha * np.log1p(-1.0 / k)))
    return start, lag


def _scale(h, alpha):
    return h ** alpha / gamma(alpha + 2.0)


def rl_integral(f, alpha):
    """
    Riemann-Liouville integral of order alpha > 0 at every grid node

    The piecewise-linear interpolant of f is integrated exactly against the
    kernel (t_k - s)^(alpha-1) / Gamma(alpha).
    """
    _check_positive_order(alpha)
    n = f.n
    start, lag = _grid_weights(alpha, n)
    f0 = f.values[0]
    history = np.convolve(f.values[1:], lag)[:n]
    out = np.empty(n + 1)
    out[0] = 0.0
    out[1:] = _scale(f.h, alpha) * (start[1:] * f0 + history)
    return f.with_values(out)


def integral_matrix(a, b, n, alpha):
    """Dense lower-triangular matrix W with (W @ f.values) = rl_integral(f, alpha).values"""
    _check_positive_order(alpha)
    start, lag = _grid_weights(alpha, n)
    k = np.arange(n + 1)
    offset = k[:, None] - k[None, :]
    mask = (offset >= 0) & (k[None, :] >= 1)
    w = np.where(mask, lag[np.clip(offset, 0, n - 1)], 0.0)
    w[:, 0] = start
    return _scale((b - a) / n, alpha) * w


def _locate(a, b, n, t):
    """Split (t - a)/h into a node index and a fractional part; fraction 0 means on-node"""
    s = (t - a) / ((b - a) / n)
    k = int(round(s))
    if abs(s - k) <= NODE_SNAP:
        return k, 0.0
    m = int(math.floor(s))
    return m, s - m


def integral_weights_at(a, b, n, alpha, t):
    """
    Weight vector w with w @ f.values = rl_integral_at(f, alpha, t)

    Args:
        a, b, n: Grid description
        alpha: Integral order > 0
        t: Evaluation point in [a, b]

    Returns:
        numpy array of length n + 1
    """
    _check_positive_order(alpha)
    if not (a <= t <= b):
        raise DomainError(f"evaluation point {t!r} outside [{a}, {b}]")
    w = np.zeros(n + 1)
    m, theta = _locate(a, b, n, t)
    p = alpha + 1.0
    if theta == 0.0:
        if m == 0:
            return w
        start, lag = _grid_weights(alpha, n)
        w[0] = start[m]
        w[1:m + 1] = lag[m - 1::-1]
    elif m == 0:
        w[0] = theta ** alpha * (alpha + 1.0 - theta)
        w[1] = theta ** p
    else:
        d0 = m + theta
        w[0] = d0 ** alpha * (alpha + (d0 - 1.0) * np.expm1(alpha * np.log1p(-1.0 / d0)))
        if m > 1:
            d = m - np.arange(1, m) + theta
            w[1:m] = _forward_power_difference(d, p) - _forward_power_difference(d - 1.0, p)
        w[m] = (theta + 1.0) ** p - 2.0 * theta ** p
        # final partial cell interpolates between t_m and t_(m+1)
        w[m + 1] = theta ** p
    return _scale((b - a) / n, alpha) * w


def rl_integral_at(f, alpha, t):
    """
    Riemann-Liouville integral of order alpha evaluated at an arbitrary t in [a, b]

    Grid nodes return exactly the value rl_integral produces there.
    """
    _check_positive_order(alpha)
    t = float(t)
    if not (f.a <= t <= f.b):
        raise DomainError(f"evaluation point {t!r} outside [{f.a}, {f.b}]")
    k, theta = _locate(f.a, f.b, f.n, t)
    if theta == 0.0:
        if k == 0:
            return 0.0
        return float(rl_integral(f, alpha).values[k])
    return float(integral_weights_at(f.a, f.b, f.n, alpha, t) @ f.values)


def grid_derivative(f):
    """First derivative: central differences inside, one-sided second order at the ends"""
    return f.with_values(np.gradient(f.values, f.h, edge_order=2))


def rl_derivative(f, alpha):
    """Riemann-Liouville derivative D I^(1-alpha) f for 0 < alpha < 1"""
    _check_unit_order(alpha)
    return grid_derivative(rl_integral(f, 1.0 - alpha))


def caputo_derivative(f, alpha):
    """Caputo derivative I^(1-alpha) D f for 0 < alpha < 1, lower limit a"""
    _check_unit_order(alpha)
    return rl_integral(grid_derivative(f), 1.0 - alpha)


def hilfer_derivative(f, order):
    """
    Hilfer derivative I^(beta(1-alpha)) D I^((1-beta)(1-alpha)) f

    Zero-order integrals are skipped, so beta = 0 reproduces rl_derivative
    exactly and beta = 1 reproduces caputo_derivative.
    """
    inner = (1.0 - order.beta) * (1.0 - order.alpha)
    outer = order.beta * (1.0 - order.alpha)
    g = rl_integral(f, inner) if inner > 0.0 else f
    g = grid_derivative(g)
    return rl_integral(g, outer) if outer > 0.0 else g


def power_values(t, a, mu):
    """
    Samples of the normalized power (t - a)^(mu - 1) / Gamma(mu)

    For mu < 1 the value at t = a is infinite; it is stored as 0.
    """
    if not (math.isfinite(mu) and mu > 0.0):
        raise DomainError(f"power exponent mu must be positive, got {mu!r}")
    s = np.asarray(t, dtype=float) - a
    out = np.zeros_like(s)
    positive = s > 0.0
    out[positive] = s[positive] ** (mu - 1.0) / gamma(mu)
    if mu == 1.0:
        out[~positive] = 1.0
    return out


def hilfer_power(mu, order):
    """
    Exact Hilfer derivative of the normalized power (t - a)^(mu - 1) / Gamma(mu)

    A grid cannot hold the kernel (t - a)^(gamma - 1), which is infinite at a,
    so components of that shape are differentiated with this rule instead.

    Args:
        mu: Power index, at least order.gamma
        order: FracOrder of the derivative

    Returns:
        Tuple (coeff, mu - alpha): the image is coeff times the normalized
        power of index mu - alpha, and coeff is 0 on the kernel mu = gamma
    """
    if math.isclose(mu, order.gamma, rel_tol=KERNEL_MATCH, abs_tol=KERNEL_MATCH):
        return 0.0, order.gamma - order.alpha
    if not mu > order.gamma:
        raise DomainError(f"power index {mu!r} lies below the type order {order.gamma!r}")
    return 1.0, mu - order.alpha
