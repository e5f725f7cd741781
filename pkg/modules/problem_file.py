"""
Problem File Module
Strict JSON problem files: parsing into a ProblemSpec plus hypotheses and
solver settings, and the canonical echo written into every report
"""

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from modules.certificates import GrowthHypothesis, LipschitzHypothesis
from modules.errors import ExprSyntaxError, ProblemFileError
from modules.exprlang import evaluate, lipschitz_probe, parse, to_source
from modules.fracops import grid_nodes
from modules.model import BoundaryTerm, ProblemSpec, validate

SCHEMA_VERSION = 1

# Solver defaults; the problem file's "solver" block and CLI flags override them
DEFAULT_SETTINGS = {
    "N": 400,
    "tol": 1e-10,
    "max_iter": 500,
    "theta": 1.0,
}

REQUIRED_FIELDS = (
    "a", "b",
    "alpha1", "beta1", "alpha2", "beta2",
    "p1", "q1", "p2", "q2",
    "lambda1", "lambda2",
    "f", "g",
)
OPTIONAL_FIELDS = ("schema_version", "x_terms", "y_terms", "solver", "growth", "lipschitz")
TERM_FIELDS = ("coeff", "order", "point")
GROWTH_FIELDS = ("M1", "M2", "M3", "Mbar1", "Mbar2", "Mbar3")
LIPSCHITZ_REQUIRED = ("L1cal", "L2cal")
LIPSCHITZ_OPTIONAL = ("L1zero", "L2zero")
SAMPLING_FACTOR = 4


@dataclass
class ProblemFile:
    """One parsed problem file"""

    spec: ProblemSpec
    settings: dict
    solver_block: dict = field(default_factory=dict)
    growth: Optional[GrowthHypothesis] = None
    lipschitz: Optional[LipschitzHypothesis] = None
    growth_block: Optional[dict] = None
    lipschitz_block: Optional[dict] = None
    sampled_zeros: tuple = ()


def _reject_duplicates(pairs):
    seen = {}
    for key, value in pairs:
        if key in seen:
            raise ProblemFileError("duplicate key", key)
        seen[key] = value
    return seen


def _check_keys(block, allowed, required, context):
    if not isinstance(block, dict):
        raise ProblemFileError("must be a JSON object", context)
    for key in block:
        if key not in allowed:
            raise ProblemFileError(f"unknown field (allowed: {', '.join(allowed)})", f"{context}.{key}" if context else key)
    for key in required:
        if key not in block:
            raise ProblemFileError("missing required field", f"{context}.{key}" if context else key)


def _real(block, key, context=""):
    value = block[key]
    name = f"{context}.{key}" if context else key
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ProblemFileError(f"must be a number, got {json.dumps(value)}", name)
    value = float(value)
    if not math.isfinite(value):
        raise ProblemFileError("must be finite", name)
    return value


def _expression(block, key):
    source = block[key]
    if not isinstance(source, str):
        raise ProblemFileError("must be an expression string", key)
    try:
        return parse(source)
    except ExprSyntaxError as e:
        raise ProblemFileError(str(e), key) from e


def _terms(document, key):
    raw = document.get(key, [])
    if not isinstance(raw, list):
        raise ProblemFileError("must be a list of {coeff, order, point} objects", key)
    terms = []
    for i, entry in enumerate(raw):
        context = f"{key}[{i}]"
        _check_keys(entry, TERM_FIELDS, TERM_FIELDS, context)
        terms.append(BoundaryTerm(*(_real(entry, name, context) for name in TERM_FIELDS)))
    return tuple(terms)


def _solver_block(document):
    block = document.get("solver", {})
    _check_keys(block, tuple(DEFAULT_SETTINGS), (), "solver")
    parsed = {}
    for key in block:
        if key in ("N", "max_iter"):
            value = block[key]
            if isinstance(value, bool) or not isinstance(value, int):
                raise ProblemFileError(f"must be an integer, got {json.dumps(value)}", f"solver.{key}")
            parsed[key] = value
        else:
            parsed[key] = _real(block, key, "solver")
    return parsed


def sample_sup(expr, spec):
    """sup over t of |expr(t, 0, 0)| on a grid four times finer than the problem grid"""
    t = grid_nodes(spec.a, spec.b, SAMPLING_FACTOR * spec.n)
    zeros = np.zeros_like(t)
    return float(np.max(np.abs(evaluate(expr, t, zeros, zeros))))


def parse_problem(document, n=None):
    """
    Build a ProblemFile from a decoded JSON document

    Args:
        document: Decoded JSON object
        n: Grid size overriding the solver block

    Raises:
        ProblemFileError for schema violations (unknown, missing or mistyped fields)
        ValidationError when the resulting specification violates its constraints
    """
    _check_keys(document, REQUIRED_FIELDS + OPTIONAL_FIELDS, REQUIRED_FIELDS, "")
    if "schema_version" in document and document["schema_version"] != SCHEMA_VERSION:
        raise ProblemFileError(f"unsupported version {document['schema_version']!r}", "schema_version")

    solver_block = _solver_block(document)
    settings = dict(DEFAULT_SETTINGS)
    settings.update(solver_block)
    if n is not None:
        solver_block["N"] = n
        settings["N"] = n

    numbers = {key: _real(document, key) for key in REQUIRED_FIELDS if key not in ("f", "g")}
    spec = validate(ProblemSpec(
        **numbers,
        f=_expression(document, "f"),
        g=_expression(document, "g"),
        x_terms=_terms(document, "x_terms"),
        y_terms=_terms(document, "y_terms"),
        n=settings["N"],
    ))
    problem = ProblemFile(spec=spec, settings=settings, solver_block=solver_block)

    if "growth" in document:
        block = document["growth"]
        _check_keys(block, GROWTH_FIELDS, GROWTH_FIELDS, "growth")
        problem.growth_block = {key: _real(block, key, "growth") for key in GROWTH_FIELDS}
        problem.growth = GrowthHypothesis(**problem.growth_block)

    if "lipschitz" in document:
        block = document["lipschitz"]
        _check_keys(block, LIPSCHITZ_REQUIRED + LIPSCHITZ_OPTIONAL, LIPSCHITZ_REQUIRED, "lipschitz")
        problem.lipschitz_block = {key: _real(block, key, "lipschitz") for key in block}
        values = dict(problem.lipschitz_block)
        sampled = []
        for key, expr in (("L1zero", spec.f), ("L2zero", spec.g)):
            if key not in values:
                values[key] = sample_sup(expr, spec)
                sampled.append(key)
        problem.sampled_zeros = tuple(sampled)
        problem.lipschitz = LipschitzHypothesis(**{k: values[k] for k in LIPSCHITZ_REQUIRED + LIPSCHITZ_OPTIONAL})
    return problem


def load_problem(path, n=None):
    """Read and parse a problem file; n overrides the grid size of its solver block"""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ProblemFileError(f"cannot read problem file: {e.strerror}", str(path)) from e
    try:
        document = json.loads(text, object_pairs_hook=_reject_duplicates)
    except json.JSONDecodeError as e:
        raise ProblemFileError(f"invalid JSON at line {e.lineno} column {e.colno}: {e.msg}", str(path)) from e
    return parse_problem(document, n)


def probe_lipschitz(problem, radius=10.0, samples=2000):
    """Empirical Lipschitz hypothesis from lipschitz_probe on the box [-radius, radius]^2"""
    spec = problem.spec
    box = (-radius, radius, -radius, radius)
    return LipschitzHypothesis(
        L1cal=lipschitz_probe(spec.f, box, samples, (spec.a, spec.b)),
        L2cal=lipschitz_probe(spec.g, box, samples, (spec.a, spec.b)),
        L1zero=sample_sup(spec.f, spec),
        L2zero=sample_sup(spec.g, spec),
        source="empirical",
    )


def problem_echo(problem):
    """The problem file in canonical form; parse_problem(problem_echo(p)) rebuilds p.spec"""
    spec = problem.spec
    document = {"schema_version": SCHEMA_VERSION}
    for key in REQUIRED_FIELDS:
        if key not in ("f", "g"):
            document[key] = getattr(spec, key)
    document["f"] = to_source(spec.f)
    document["g"] = to_source(spec.g)
    document["x_terms"] = [{"coeff": t.coeff, "order": t.order, "point": t.point} for t in spec.x_terms]
    document["y_terms"] = [{"coeff": t.coeff, "order": t.order, "point": t.point} for t in spec.y_terms]
    document["solver"] = dict(problem.solver_block, N=spec.n)
    if problem.growth_block is not None:
        document["growth"] = dict(problem.growth_block)
    if problem.lipschitz_block is not None:
        document["lipschitz"] = dict(problem.lipschitz_block)
    return document
