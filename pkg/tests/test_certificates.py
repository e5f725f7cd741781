from dataclasses import replace

import mpmath
import pytest
import scipy.special

from conftest import make_spec
from modules.certificates import (
    FAIL,
    NOT_APPLICABLE,
    NOTE_EMPIRICAL,
    PASS,
    GrowthHypothesis,
    LipschitzHypothesis,
    ParameterSweep,
    banach_check,
    certify,
    growth_bounds,
    uh_constants,
)
from modules.errors import DomainError


def oracle(a, b, a1, b1, a2, p1, q1, p2, lam1, lam2, mu_terms, omega_terms, M, Mbar, L1, L2, L1zero, L2zero):
    """Every certificate constant recomputed at 40 digits"""
    mp = mpmath.mp
    mp.dps = 40
    f = mpmath.mpf
    a, b = f(a), f(b)
    a1, b1, a2, p1, q1, p2 = (f(v) for v in (a1, b1, a2, p1, q1, p2))
    lam1, lam2 = abs(f(lam1)), abs(f(lam2))
    L1, L2 = f(L1), f(L2)

    def moment(e):
        return (b - a) ** e / mpmath.gamma(e + 1)

    def term_sum(terms, e, absolute=True):
        total = f(0)
        for c, order, point in terms:
            c = f(c)
            total += (abs(c) if absolute else c) * (f(point) - a) ** (e + f(order)) / mpmath.gamma(e + f(order) + 1)
        return total

    g1 = a1 + b1 - a1 * b1
    d1 = p1 + q1 - p1 * q1
    ex, ey = g1 + a2 - 1, d1 + p2 - 1
    phi1 = moment(ex)
    phi2 = term_sum(mu_terms, ey, absolute=False)
    phi3 = term_sum(omega_terms, ex, absolute=False)
    phi4 = moment(ey)
    Lam = phi1 * phi4 - phi2 * phi3
    kx, ky = abs(phi1) / abs(Lam), abs(phi4) / abs(Lam)
    P1, P2, P3, P4 = abs(phi1), abs(phi2), abs(phi3), abs(phi4)
    sx, sy = a1 + a2, p1 + p2

    def mu(e):
        return term_sum(mu_terms, e)

    def om(e):
        return term_sum(omega_terms, e)

    X1 = lam1 * (moment(a2) + kx * (P4 * moment(a2) + P2 * om(a2)))
    Y1 = lam2 * kx * (P4 * mu(p2) + P2 * moment(p2))
    F1 = moment(sx) * (1 + kx * P4) + kx * P2 * om(sx)
    G1 = kx * (P4 * mu(sy) + P2 * moment(sy))
    X2 = lam1 * ky * (P1 * om(a2) + P3 * moment(a2))
    Y2 = lam2 * (moment(p2) + ky * (P1 * moment(p2) + P3 * mu(p2)))
    # y_terms enter F2 with order alpha1 + alpha2 + sigma, not alpha2 + sigma
    F2 = ky * (P1 * om(sx) + P3 * moment(sx))
    G2 = moment(sy) * (1 + ky * P1) + ky * P3 * mu(sy)
    F, G, X, Y = F1 + F2, G1 + G2, X1 + X2, Y1 + Y2

    K1 = F * f(M[1]) + G * f(Mbar[1]) + X
    K2 = F * f(M[2]) + G * f(Mbar[2]) + Y
    ls_bound = (F * f(M[0]) + G * f(Mbar[0])) / min(1 - K1, 1 - K2)
    kappa = F * L1 + G * L2 + X + Y
    radius = (F * f(L1zero) + G * f(L2zero)) / (1 - kappa)

    C1, C2 = moment(sx), moment(sy)
    A1 = C1 * L1 + lam1 * moment(a2) + kx * (P4 * mu(sy) * L2 + P2 * (om(sx) * L1 + lam1 * om(a2)))
    B1 = C1 * L1 + kx * (P4 * (lam2 * mu(p2) + mu(sy) * L2) + P2 * om(sx) * L1)
    A2 = C2 * L2 + lam2 * moment(p2) + ky * (P1 * om(sx) * L1 + P3 * (mu(sy) * L2 + lam2 * mu(p2)))
    B2 = C2 * L2 + ky * (P1 * (lam1 * om(a2) + om(sx) * L1) + P3 * mu(sy) * L2)
    Delta = 1 - B1 * B2 / ((1 - A1) * (1 - A2))
    lambda_uh = (C1 * (1 - A2) + B2 * C1 + C2 * (1 - A1) + B1 * C2) / (Delta * (1 - A1) * (1 - A2))

    values = dict(
        phi1=phi1, phi2=phi2, phi3=phi3, phi4=phi4, Lambda=Lam,
        X1=X1, Y1=Y1, F1=F1, G1=G1, X2=X2, Y2=Y2, F2=F2, G2=G2,
        K1=K1, K2=K2, ls_bound=ls_bound, kappa=kappa, radius=radius,
        A1=A1, B1=B1, C1=C1, A2=A2, B2=B2, C2=C2, Delta=Delta, lambda_uh=lambda_uh,
    )
    return {name: float(value) for name, value in values.items()}


def test_certificate_constants_match_high_precision_oracle(derived_spec, derived_growth, derived_lipschitz):
    cert = certify(derived_spec, derived_growth, derived_lipschitz)
    expected = oracle(
        0.0, 1.0, 0.75, 0.5, 0.75, 0.75, 0.5, 0.75, 0.05, 0.05,
        [(1.0, 0.5, 0.5)], [(0.5, 0.25, 0.75)],
        (1.0, 0.1, 0.1), (1.0, 0.1, 0.1), 0.1, 0.1, 1.0, 1.0,
    )
    constants = cert.constants()
    for name, value in expected.items():
        assert constants[name] == pytest.approx(value, rel=1e-12), name


def test_derived_fixture_passes_every_verdict(derived_spec, derived_growth, derived_lipschitz):
    cert = certify(derived_spec, derived_growth, derived_lipschitz)
    assert {name: v.status for name, v in cert.verdicts.items()} == {
        "existence": PASS,
        "uniqueness": PASS,
        "ulam_hyers": PASS,
    }
    assert 0.7 < cert.kappa < 0.85


def test_verdicts_without_hypotheses_are_not_applicable(derived_spec):
    cert = certify(derived_spec)
    assert all(v.status == NOT_APPLICABLE for v in cert.verdicts.values())
    constants = cert.constants()
    assert constants["kappa"] is None
    assert constants["K1"] is None
    assert constants["lambda_uh"] is None
    assert constants["phi1"] > 0.0


def test_kappa_of_decoupled_fixture(kappa_half_spec, kappa_half_lipschitz):
    check = banach_check(kappa_half_spec, kappa_half_lipschitz)
    assert check.kappa == pytest.approx(4 * 0.166 / scipy.special.gamma(2.5), rel=1e-12)
    assert check.verdict.passed
    assert check.radius == pytest.approx(
        2 / scipy.special.gamma(2.5) * (1.0 + 1.166) / (1 - check.kappa), rel=1e-12
    )


def test_large_lipschitz_constant_fails_uniqueness(derived_spec, derived_growth):
    cert = certify(derived_spec, derived_growth, LipschitzHypothesis(L1cal=0.2, L2cal=0.2, L1zero=1.0, L2zero=1.0))
    verdict = cert.verdicts["uniqueness"]
    assert verdict.status == FAIL
    assert "kappa = " in verdict.reasons[0]
    assert ">= 1" in verdict.reasons[0]
    assert cert.constants()["radius"] is None


def test_large_growth_fails_existence(derived_spec):
    growth = GrowthHypothesis(M1=1.0, M2=1.0, M3=0.0, Mbar1=1.0, Mbar2=0.0, Mbar3=0.0)
    cert = certify(derived_spec, growth)
    assert cert.verdicts["existence"].status == FAIL
    assert "K1 = " in cert.verdicts["existence"].reasons[0]
    assert cert.existence.ls_bound is None


def test_ulam_hyers_fails_when_a1_reaches_one(derived_spec):
    constants = uh_constants(derived_spec, LipschitzHypothesis(L1cal=5.0, L2cal=5.0, L1zero=0.0, L2zero=0.0))
    assert not constants.verdict.passed
    assert constants.lambda_uh is None
    assert any(reason.startswith("A1 = ") for reason in constants.verdict.reasons)


def test_ulam_hyers_component_coefficients_sum_to_lambda(derived_spec, derived_lipschitz):
    constants = uh_constants(derived_spec, derived_lipschitz)
    (cx1, cx2), (cy1, cy2) = constants.component_coefficients()
    assert cx1 + cx2 + cy1 + cy2 == pytest.approx(constants.lambda_uh, rel=1e-13)
    assert constants.phi(0.0) == 0.0
    assert constants.phi(1e-2) == pytest.approx(1e-2 * constants.lambda_uh)


@pytest.mark.parametrize("lam", [0.0, 0.05, 0.1, 0.2])
def test_kappa_increases_with_lambda(derived_lipschitz, lam):
    lower = certify(make_spec(lambda1=lam, lambda2=lam), lipschitz=derived_lipschitz).kappa
    higher = certify(make_spec(lambda1=lam + 0.01, lambda2=-(lam + 0.01)), lipschitz=derived_lipschitz).kappa
    assert higher > lower


@pytest.mark.parametrize("L", [0.0, 0.05, 0.1])
def test_kappa_increases_with_lipschitz_constant(derived_spec, L):
    low = certify(derived_spec, lipschitz=LipschitzHypothesis(L, L, 1.0, 1.0)).kappa
    high = certify(derived_spec, lipschitz=LipschitzHypothesis(L + 0.01, L, 1.0, 1.0)).kappa
    assert high > low


def test_growth_bounds_scale_with_lambda(derived_spec):
    bounds = growth_bounds(replace(derived_spec, lambda1=0.0, lambda2=0.0))
    assert bounds.X1 == 0.0
    assert bounds.Y2 == 0.0
    assert bounds.F1 > 0.0


def test_hypotheses_reject_negative_values():
    with pytest.raises(DomainError):
        GrowthHypothesis(M1=-1.0, M2=0.0, M3=0.0, Mbar1=0.0, Mbar2=0.0, Mbar3=0.0)
    with pytest.raises(DomainError):
        LipschitzHypothesis(L1cal=0.1, L2cal=float("nan"), L1zero=0.0, L2zero=0.0)


def test_empirical_hypothesis_adds_note(derived_spec):
    cert = certify(derived_spec, lipschitz=LipschitzHypothesis(0.1, 0.1, 1.0, 1.0, source="empirical"))
    assert NOTE_EMPIRICAL in cert.notes


def test_parameter_sweep_rows_in_order(derived_spec, derived_growth, derived_lipschitz):
    values = [0.0, 0.05, 0.1, 0.15]
    rows = ParameterSweep(workers=1).run(derived_spec, "lambda1", values, derived_growth, derived_lipschitz)
    assert [row["value"] for row in rows] == values
    assert all(row["valid"] for row in rows)
    kappas = [row["kappa"] for row in rows]
    assert kappas == sorted(kappas)


def test_parameter_sweep_independent_of_worker_count(derived_spec, derived_lipschitz):
    values = [0.55, 0.6, 0.7, 0.8, 0.9]
    serial = ParameterSweep(workers=1).run(derived_spec, "alpha2", values, lipschitz=derived_lipschitz)
    parallel = ParameterSweep(workers=3).run(derived_spec, "alpha2", values, lipschitz=derived_lipschitz)
    assert serial == parallel


def test_parameter_sweep_flags_invalid_points(derived_spec):
    rows = ParameterSweep().run(derived_spec, "alpha1", [0.2, 0.5])
    assert rows[0]["valid"] is False
    assert "alpha1 + alpha2" in rows[0]["diagnostics"][0]
    assert rows[1]["valid"] is True


def test_parameter_sweep_rejects_unknown_parameter(derived_spec):
    with pytest.raises(DomainError):
        ParameterSweep().run(derived_spec, "f", [1.0])
