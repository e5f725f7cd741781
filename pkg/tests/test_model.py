from dataclasses import replace

import pytest
import scipy.special

from conftest import make_decoupled_spec, make_spec
from modules.errors import SingularProblemError, ValidationError
from modules.model import BoundaryTerm, check, derived_orders, power_sum, structural_constants, validate


def test_derived_fixture_is_valid(derived_spec):
    assert check(derived_spec) == []
    assert validate(derived_spec) is derived_spec


def test_derived_orders(derived_spec):
    orders = derived_orders(derived_spec)
    assert orders.gamma1 == pytest.approx(0.875)
    assert orders.delta2 == pytest.approx(0.875)
    assert derived_spec.orders == orders


def test_structural_constants_match_closed_form(derived_spec):
    G = scipy.special.gamma
    sc = structural_constants(derived_spec)
    assert sc.phi1 == pytest.approx(1.0 / G(1.625), rel=1e-12)
    assert sc.phi4 == pytest.approx(1.0 / G(1.625), rel=1e-12)
    assert sc.phi2 == pytest.approx(0.5 ** 1.125 / G(2.125), rel=1e-12)
    assert sc.phi3 == pytest.approx(0.5 * 0.75 ** 0.875 / G(1.875), rel=1e-12)
    assert sc.Lambda == pytest.approx(sc.phi1 * sc.phi4 - sc.phi2 * sc.phi3, rel=1e-15)


def test_empty_sums_give_diagonal_constants():
    sc = make_decoupled_spec().constants
    assert sc.phi2 == 0.0
    assert sc.phi3 == 0.0
    assert sc.Lambda == pytest.approx(sc.phi1 * sc.phi4)


def test_power_sum_absolute():
    terms = (BoundaryTerm(-2.0, 1.0, 0.5), BoundaryTerm(1.0, 1.0, 0.5))
    assert power_sum(terms, 0.0, 0.0) == pytest.approx(-0.5)
    assert power_sum(terms, 0.0, 0.0, absolute=True) == pytest.approx(1.5)


def test_singular_lambda_is_rejected():
    # mu = omega = Gamma(2.625)/Gamma(1.625) makes phi2 = phi3 = phi1 = phi4
    term = BoundaryTerm(1.625, 1.0, 1.0)
    spec = make_spec(x_terms=(term,), y_terms=(term,))
    with pytest.raises(SingularProblemError):
        structural_constants(spec)
    with pytest.raises(ValidationError) as info:
        validate(spec)
    assert "singular" in info.value.diagnostics[0]


def test_check_collects_every_problem(derived_spec):
    spec = replace(derived_spec, alpha1=1.2, b=0.0, n=1)
    problems = check(spec)
    assert any(p.startswith("alpha1 = 1.2") for p in problems)
    assert any(p.startswith("b = 0.0 must exceed a") for p in problems)
    assert any(p.startswith("N = 1") for p in problems)


def test_order_sum_must_exceed_one(derived_spec):
    problems = check(replace(derived_spec, alpha1=0.25, alpha2=0.5))
    assert "alpha1 + alpha2 = 0.75 must satisfy 1 < alpha1 + alpha2 <= 2" in problems


def test_boundary_point_outside_interval(derived_spec):
    spec = replace(derived_spec, x_terms=(BoundaryTerm(1.0, 0.5, 1.5),))
    problems = check(spec)
    assert problems == ["x_terms[0].point = 1.5 outside [a, b] = [0.0, 1.0]"]


def test_nonpositive_term_order(derived_spec):
    spec = replace(derived_spec, y_terms=(BoundaryTerm(1.0, 0.0, 0.5),))
    assert check(spec) == ["y_terms[0].order = 0.0 must be positive"]


@pytest.mark.parametrize("name", ["beta1", "q2"])
@pytest.mark.parametrize("value", [0.0, 1.0, -0.1])
def test_type_parameters_lie_in_open_unit_interval(derived_spec, name, value):
    problems = check(replace(derived_spec, **{name: value}))
    assert problems[0] == f"{name} = {value!r} must lie in (0, 1)"


def test_boolean_is_not_a_number(derived_spec):
    problems = check(replace(derived_spec, lambda1=True))
    assert problems == ["lambda1 = True must be a finite real"]


def test_negative_left_endpoint(derived_spec):
    assert "a = -1.0 must be >= 0" in check(replace(derived_spec, a=-1.0))


def test_spec_coerces_terms_to_tuples():
    spec = make_spec(x_terms=[BoundaryTerm(1.0, 0.5, 0.5)])
    assert isinstance(spec.x_terms, tuple)
    assert spec == make_spec()
