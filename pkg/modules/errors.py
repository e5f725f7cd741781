"""
Error Types
Exception hierarchy shared by every module
"""


class HilferLangevinError(Exception):
    """Base class for all errors raised by the package"""


class DomainError(HilferLangevinError, ValueError):
    """A numeric argument lies outside the domain of an operation"""


class ExprSyntaxError(HilferLangevinError):
    """Malformed expression source"""

    def __init__(self, message, offset, expected=None):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset
        self.expected = expected


class UnknownIdentifierError(ExprSyntaxError):
    """Identifier that is neither a variable nor a known function"""


class ExprEvalError(HilferLangevinError):
    """Evaluation failed (division by zero, sqrt of negative, non-finite value)"""

    def __init__(self, message, position, index=None, t=None):
        text = f"{message} (source position {position})"
        if t is not None:
            text += f" at t = {t!r}"
        super().__init__(text)
        self.reason = message
        self.position = position
        self.index = index
        self.t = t

    def at(self, t):
        """Return a copy of this error pinned to the offending t"""
        return ExprEvalError(self.reason, self.position, self.index, t)


class ValidationError(HilferLangevinError):
    """Problem specification violates one or more constraints"""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(self.diagnostics))


class SingularProblemError(HilferLangevinError):
    """Lambda = phi1*phi4 - phi2*phi3 vanishes within tolerance"""


class DegenerateConstantError(HilferLangevinError):
    """A1 or A2 equals one exactly, so the stability constants are undefined"""


class ConvergenceError(HilferLangevinError, RuntimeError):
    """Iteration failed to converge within the allowed iterations"""

    def __init__(self, message, trace=()):
        super().__init__(message)
        self.trace = tuple(trace)


class DivergenceError(ConvergenceError):
    """Iteration deltas grew by an order of magnitude over five steps"""


class ConditioningError(HilferLangevinError):
    """Assembled linear system is numerically singular"""

    def __init__(self, condition_number):
        super().__init__(f"linear system is numerically singular (estimated condition number {condition_number:.3e})")
        self.condition_number = condition_number


class NonlinearProblemError(HilferLangevinError):
    """Linear method requested for nonlinearities that depend on x or y"""


class UncertifiedError(HilferLangevinError):
    """Certified solve requested but the contraction certificate fails"""


class ProblemFileError(HilferLangevinError):
    """Problem file is missing, malformed or violates the strict schema"""

    def __init__(self, message, field=None):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field
