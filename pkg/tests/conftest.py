import json

import pytest

from modules.certificates import GrowthHypothesis, LipschitzHypothesis
from modules.exprlang import parse
from modules.model import BoundaryTerm, ProblemSpec

ORDERS = dict(alpha1=0.75, beta1=0.5, alpha2=0.75, beta2=0.5, p1=0.75, q1=0.5, p2=0.75, q2=0.5)


def make_spec(f="1 + 0.1*sin(x + y)", g="cos(t) + 0.1*sin(x - y)", **overrides):
    """Coupled fixture with one nonlocal term per boundary condition"""
    fields = dict(
        a=0.0,
        b=1.0,
        lambda1=0.05,
        lambda2=0.05,
        x_terms=(BoundaryTerm(1.0, 0.5, 0.5),),
        y_terms=(BoundaryTerm(0.5, 0.25, 0.75),),
        n=400,
        **ORDERS,
    )
    fields.update(overrides)
    return ProblemSpec(f=parse(f), g=parse(g), **fields)


def make_decoupled_spec(f="1", g="1", **overrides):
    """Empty boundary sums and lambda = 0"""
    overrides.setdefault("lambda1", 0.0)
    overrides.setdefault("lambda2", 0.0)
    return make_spec(f, g, x_terms=(), y_terms=(), **overrides)


def problem_document(**overrides):
    document = {
        "schema_version": 1,
        "a": 0.0,
        "b": 1.0,
        "lambda1": 0.05,
        "lambda2": 0.05,
        "f": "1 + 0.1*sin(x + y)",
        "g": "cos(t) + 0.1*sin(x - y)",
        "x_terms": [{"coeff": 1.0, "order": 0.5, "point": 0.5}],
        "y_terms": [{"coeff": 0.5, "order": 0.25, "point": 0.75}],
        "solver": {"N": 200},
        "growth": {"M1": 1.0, "M2": 0.1, "M3": 0.1, "Mbar1": 1.0, "Mbar2": 0.1, "Mbar3": 0.1},
        "lipschitz": {"L1cal": 0.1, "L2cal": 0.1, "L1zero": 1.0, "L2zero": 1.0},
    }
    document.update(ORDERS)
    document.update(overrides)
    return document


def kappa_half_document(**overrides):
    """Decoupled nonlinear problem whose contraction constant is 4 * 0.166 / Gamma(2.5)"""
    document = problem_document(
        lambda1=0.0,
        lambda2=0.0,
        f="1 + 0.166*sin(x + y)",
        g="t + 0.166*cos(x - y)",
        x_terms=[],
        y_terms=[],
        growth={"M1": 1.0, "M2": 0.166, "M3": 0.166, "Mbar1": 1.0, "Mbar2": 0.166, "Mbar3": 0.166},
        lipschitz={"L1cal": 0.166, "L2cal": 0.166, "L1zero": 1.0, "L2zero": 1.166},
    )
    document.update(overrides)
    return document


@pytest.fixture
def derived_spec():
    return make_spec()


@pytest.fixture
def derived_growth():
    return GrowthHypothesis(M1=1.0, M2=0.1, M3=0.1, Mbar1=1.0, Mbar2=0.1, Mbar3=0.1)


@pytest.fixture
def derived_lipschitz():
    return LipschitzHypothesis(L1cal=0.1, L2cal=0.1, L1zero=1.0, L2zero=1.0)


@pytest.fixture
def kappa_half_spec():
    return make_decoupled_spec("1 + 0.166*sin(x + y)", "t + 0.166*cos(x - y)")


@pytest.fixture
def kappa_half_lipschitz():
    return LipschitzHypothesis(L1cal=0.166, L2cal=0.166, L1zero=1.0, L2zero=1.166)


@pytest.fixture
def write_problem(tmp_path):
    """Write a problem document to tmp_path and return its path"""

    def write(document, name="problem.json"):
        path = tmp_path / name
        path.write_text(json.dumps(document), encoding="utf-8")
        return path

    return write
