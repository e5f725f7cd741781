"""
Expression Language Module
Recursive-descent parser, evaluator and canonical printer for the
nonlinearities f(t, x, y) and g(t, x, y)
"""

import math
import re
from dataclasses import dataclass, field

import numpy as np

from modules.errors import DomainError, ExprEvalError, ExprSyntaxError, UnknownIdentifierError

VARIABLES = ("t", "x", "y")
FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "abs": np.abs,
    "sqrt": np.sqrt,
}

_TOKEN = re.compile(
    r"(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/()])"
)

_ADDITIVE, _MULTIPLICATIVE, _UNARY, _ATOM = 1, 2, 3, 4


class Expr:
    """Base class of expression tree nodes"""

    precedence = _ATOM


@dataclass(frozen=True)
class Number(Expr):
    value: float
    position: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Variable(Expr):
    name: str
    position: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Negate(Expr):
    operand: Expr
    position: int = field(default=0, compare=False)
    precedence = _UNARY


@dataclass(frozen=True)
class BinaryOp(Expr):
    op: str
    left: Expr
    right: Expr
    position: int = field(default=0, compare=False)

    @property
    def precedence(self):
        return _ADDITIVE if self.op in "+-" else _MULTIPLICATIVE


@dataclass(frozen=True)
class Call(Expr):
    name: str
    argument: Expr
    position: int = field(default=0, compare=False)


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    offset: int


def _tokenize(source):
    """Split source into tokens whose offsets are byte offsets into the UTF-8 encoding"""
    tokens = []
    index = 0
    byte_offset = 0
    while index < len(source):
        char = source[index]
        if char.isspace():
            index += 1
            byte_offset += len(char.encode("utf-8"))
            continue
        match = _TOKEN.match(source, index)
        if match is None:
            raise ExprSyntaxError(f"unexpected character {char!r}", byte_offset)
        tokens.append(_Token(match.lastgroup, match.group(), byte_offset))
        byte_offset += len(match.group().encode("utf-8"))
        index = match.end()
    tokens.append(_Token("end", "", byte_offset))
    return tokens


class Parser:
    """Handles parsing of one expression source"""

    def __init__(self, source):
        self.tokens = _tokenize(source)
        self.index = 0

    def parse(self):
        expr = self._expression()
        self._expect("end", "end of input")
        return expr

    @property
    def _current(self):
        return self.tokens[self.index]

    def _advance(self):
        token = self.tokens[self.index]
        self.index += 1
        return token

    def _at_op(self, ops):
        token = self._current
        return token.kind == "op" and token.text in ops

    def _expect(self, kind, expected, text=None):
        token = self._current
        if token.kind != kind or (text is not None and token.text != text):
            found = token.text or "end of input"
            raise ExprSyntaxError(f"expected {expected}, found {found!r}", token.offset, expected)
        return self._advance()

    def _expression(self):
        left = self._term()
        while self._at_op("+-"):
            token = self._advance()
            left = BinaryOp(token.text, left, self._term(), token.offset)
        return left

    def _term(self):
        left = self._unary()
        while self._at_op("*/"):
            token = self._advance()
            left = BinaryOp(token.text, left, self._unary(), token.offset)
        return left

    def _unary(self):
        if self._at_op("-"):
            token = self._advance()
            return Negate(self._unary(), token.offset)
        return self._primary()

    def _primary(self):
        token = self._current
        if token.kind == "number":
            self._advance()
            value = float(token.text)
            if not math.isfinite(value):
                raise ExprSyntaxError(f"numeric literal {token.text!r} overflows double precision", token.offset)
            return Number(value, token.offset)
        if token.kind == "name":
            self._advance()
            if token.text in VARIABLES:
                return Variable(token.text, token.offset)
            if token.text in FUNCTIONS:
                self._expect("op", "'(' after function name", "(")
                argument = self._expression()
                self._expect("op", "')'", ")")
                return Call(token.text, argument, token.offset)
            raise UnknownIdentifierError(
                f"unknown identifier {token.text!r} (variables: t, x, y; functions: {', '.join(FUNCTIONS)})",
                token.offset,
            )
        if self._at_op("("):
            self._advance()
            inner = self._expression()
            self._expect("op", "')'", ")")
            return inner
        found = token.text or "end of input"
        raise ExprSyntaxError(
            f"expected number, variable, function or '(', found {found!r}",
            token.offset,
            "operand",
        )


def parse(source):
    """
    Parse an expression

    Args:
        source: Expression text such as "sin(t) - x/2"

    Returns:
        Expression tree
    """
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    return Parser(source).parse()


def _first_index(mask):
    flat = np.flatnonzero(np.ravel(mask))
    return int(flat[0]) if flat.size else None


def _check_finite(value, position, what):
    finite = np.isfinite(value)
    if not np.all(finite):
        raise ExprEvalError(f"non-finite result of {what}", position, _first_index(~finite))
    return value


def _eval_node(node, env):
    if isinstance(node, Number):
        return node.value
    if isinstance(node, Variable):
        return env[node.name]
    if isinstance(node, Negate):
        return -_eval_node(node.operand, env)
    if isinstance(node, BinaryOp):
        left = _eval_node(node.left, env)
        right = _eval_node(node.right, env)
        if node.op == "+":
            value = left + right
        elif node.op == "-":
            value = left - right
        elif node.op == "*":
            value = left * right
        else:
            zero = np.asarray(right) == 0.0
            if np.any(zero):
                raise ExprEvalError("division by zero", node.position, _first_index(zero))
            value = left / right
        return _check_finite(value, node.position, f"'{node.op}'")
    if isinstance(node, Call):
        argument = _eval_node(node.argument, env)
        if node.name == "sqrt":
            negative = np.asarray(argument) < 0.0
            if np.any(negative):
                raise ExprEvalError("sqrt of negative argument", node.position, _first_index(negative))
        return _check_finite(FUNCTIONS[node.name](argument), node.position, f"{node.name}()")
    raise TypeError(f"not an expression node: {node!r}")


def evaluate(expr, t, x, y):
    """
    Evaluate an expression at scalars or at equally shaped numpy arrays

    Returns:
        float for scalar inputs, otherwise an array shaped like the inputs
    """
    env = {
        "t": np.asarray(t, dtype=float),
        "x": np.asarray(x, dtype=float),
        "y": np.asarray(y, dtype=float),
    }
    shape = np.broadcast_shapes(env["t"].shape, env["x"].shape, env["y"].shape)
    with np.errstate(all="ignore"):
        value = _eval_node(expr, env)
    value = _check_finite(np.asarray(value, dtype=float), getattr(expr, "position", 0), "expression")
    if shape == ():
        return float(value)
    return np.broadcast_to(value, shape).copy()


def free_variables(expr):
    """Set of variable names the expression mentions"""
    if isinstance(expr, Variable):
        return frozenset({expr.name})
    if isinstance(expr, Number):
        return frozenset()
    if isinstance(expr, Negate):
        return free_variables(expr.operand)
    if isinstance(expr, Call):
        return free_variables(expr.argument)
    return free_variables(expr.left) | free_variables(expr.right)


def to_source(expr):
    """Canonical text of an expression; parse(to_source(e)) == e for parsed trees"""
    if isinstance(expr, Number):
        text = repr(float(expr.value))
        return f"({text})" if expr.value < 0 else text
    if isinstance(expr, Variable):
        return expr.name
    if isinstance(expr, Call):
        return f"{expr.name}({to_source(expr.argument)})"
    if isinstance(expr, Negate):
        return "-" + _wrap(expr.operand, expr.operand.precedence < _UNARY)
    left = _wrap(expr.left, expr.left.precedence < expr.precedence)
    right = _wrap(expr.right, expr.right.precedence <= expr.precedence)
    return f"{left} {expr.op} {right}"


def _wrap(expr, parenthesize):
    text = to_source(expr)
    return f"({text})" if parenthesize else text


def lipschitz_probe(expr, box, samples=2000, t_range=(0.0, 1.0), seed=0):
    """
    Empirical lower estimate of the joint Lipschitz constant in (x, y)

    The estimate is max |e(t, x2, y2) - e(t, x1, y1)| / (|x2 - x1| + |y2 - y1|)
    over random pairs sharing t. It is a lower bound only; certificates that
    use it are labeled "empirical".

    Args:
        expr: Parsed expression
        box: (x_low, x_high, y_low, y_high)
        samples: Number of sampled pairs, at least 100
        t_range: (a, b) interval for t
        seed: Seed of the sampling stream

    Returns:
        Non-negative float
    """
    x_low, x_high, y_low, y_high = (float(v) for v in box)
    if not all(np.isfinite([x_low, x_high, y_low, y_high])) or x_high < x_low or y_high < y_low:
        raise DomainError(f"probe box must be finite and ordered, got {box!r}")
    if samples < 100:
        raise DomainError(f"lipschitz_probe needs at least 100 samples, got {samples}")

    rng = np.random.default_rng(seed)
    t = rng.uniform(t_range[0], t_range[1], samples)
    x1 = rng.uniform(x_low, x_high, samples)
    y1 = rng.uniform(y_low, y_high, samples)

    # steps are log-uniform so that both local slopes and secants are probed
    width = max(x_high - x_low, y_high - y_low, 1e-12)
    step = width * 10.0 ** rng.uniform(-3.0, 0.0, (2, samples))
    step *= rng.choice((-1.0, 1.0), (2, samples))
    family = np.arange(samples) % 3
    step[1, family == 0] = 0.0
    step[0, family == 1] = 0.0

    x2 = np.clip(x1 + step[0], x_low, x_high)
    y2 = np.clip(y1 + step[1], y_low, y_high)
    distance = np.abs(x2 - x1) + np.abs(y2 - y1)
    moved = distance > 0.0
    if not np.any(moved):
        return 0.0

    change = np.abs(evaluate(expr, t, x2, y2) - evaluate(expr, t, x1, y1))
    return float(np.max(change[moved] / distance[moved]))
