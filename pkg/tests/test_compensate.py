import cmath
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fracshape.compensate import (
    asymptotics,
    expand_pair,
    expand_real,
    explicit_char_points,
    implicit_terms,
    io_term,
    mirror,
    pair_q_polynomial,
    pair_x_polynomial,
    plan_cancellation,
    q_polynomial,
    stable_pair_cancel,
)
from fracshape.errors import DomainError
from fracshape.focore import ExplicitX, FactoredTf, ImplicitPower, PseudoPoly, log_grid, matignon_stable, pseudo_roots


def at(f, w):
    return f.evaluate(np.atleast_1d(1j * np.asarray(w, float)))


# explicit split ---------------------------------------------------------------

def test_expand_real_nu2():
    x, q = expand_real(1.0, 2)
    assert x == ExplicitX(1.0, Fraction(1, 2), 1)
    assert q.poly.coeffs == (1, 1) and q.k == 1


def test_expand_real_nu3_root_sector():
    _, q = expand_real(1.0, 3)
    r = pseudo_roots(q.poly)
    np.testing.assert_allclose(np.sort(np.abs(np.degrees(np.angle(r)))), [120, 120], atol=1e-9)
    assert matignon_stable(q.poly).stable


def test_expand_real_product_identity():
    x, q = expand_real(1.0, 2)
    w = np.array([0.1, 1.0, 10.0])
    np.testing.assert_allclose(at(x, w) * at(q, w), 1 - 1j * w, rtol=1e-12)


def test_expand_real_rejects_bad_input():
    with pytest.raises(DomainError):
        expand_real(-1.0, 2)
    with pytest.raises(DomainError):
        expand_real(1.0, 1)


# characteristic points ----------------------------------------------------------

def test_char_points_half():
    cp = explicit_char_points(1.0, 0.5)
    assert cp.omega_min == pytest.approx(0.5, abs=1e-12)
    assert cp.mag_min == pytest.approx(0.70711, abs=1e-5)
    assert cp.phase_min_deg == pytest.approx(-45.0, abs=1e-12)
    assert cp.phase_at_z_deg == pytest.approx(-67.5, abs=1e-12)


def test_char_points_match_evaluation():
    for a in (Fraction(1, 2), Fraction(1, 3), Fraction(1, 4)):
        cp = explicit_char_points(2.0, a)
        v = at(ExplicitX(2.0, a), cp.omega_min)[0]
        assert abs(v) == pytest.approx(cp.mag_min, rel=1e-10)
        assert cmath.phase(v) == pytest.approx(cp.phase_min, abs=1e-10)


def test_char_points_io_has_no_minimum():
    assert not explicit_char_points(1.0, 1).has_minimum


@pytest.mark.parametrize("nu", range(2, 11))
def test_phase_coincidence_explicit_implicit(nu):
    a = 1 / nu
    z = 1.7
    _, xt = implicit_terms(z, nu)
    expected = (math.pi / 2) * (a / 2 - 1)
    assert cmath.phase(at(ExplicitX(z, Fraction(1, nu)), z)[0]) == pytest.approx(expected, abs=1e-9)
    assert cmath.phase(at(xt, z)[0]) == pytest.approx(expected, abs=1e-9)


@pytest.mark.parametrize("nu", [2, 3, 5, 10])
def test_minimum_point_is_global(nu):
    a = 1 / nu
    cp = explicit_char_points(1.0, a)
    w = log_grid(1e-4, 1e4, 200)
    mags = np.abs(at(ExplicitX(1.0, Fraction(1, nu)), w))
    assert np.all(mags >= cp.mag_min * (1 - 1e-12))
    i = int(np.argmin(mags))
    assert w[i - 1] <= cp.omega_min <= w[i + 1]


# implicit terms and mirrors -------------------------------------------------

def test_implicit_terms_values():
    qt, xt = implicit_terms(1.0, 2)
    v = at(xt, 1.0)[0]
    assert abs(v) == pytest.approx(2 ** 0.25, abs=1e-5)
    assert math.degrees(cmath.phase(v)) == pytest.approx(-67.5, abs=1e-10)
    assert qt.exponent == Fraction(1, 2) and qt.mirrored


def test_implicit_terms_closed_form():
    nu, z = 3, 2.0
    a = 1 / nu
    _, xt = implicit_terms(z, nu)
    w = log_grid(1e-2, 1e2, 20)
    v = at(xt, w)
    np.testing.assert_allclose(np.abs(v), (1 + (w / z) ** 2) ** (a / 2), rtol=1e-10)
    np.testing.assert_allclose(np.angle(v), np.arctan(-w / z) - (1 - a) * np.arctan(w / z), atol=1e-10)


def test_implicit_large_nu_tends_to_mirror():
    qt, _ = implicit_terms(1.0, 1000)
    assert abs(at(qt, 1.0)[0]) == pytest.approx(2 ** (999 / 2000), rel=1e-12)
    assert abs(at(qt, 1.0)[0]) == pytest.approx(math.sqrt(2), rel=1e-3)


def test_implicit_pair_requires_complex():
    with pytest.raises(DomainError):
        implicit_terms(1.0, 2, pair=True)


def test_mirror_values_and_all_pass():
    d = mirror(1.0)
    v = at(d, 1.0)[0]
    assert abs(v) == pytest.approx(math.sqrt(2)) and math.degrees(cmath.phase(v)) == pytest.approx(45.0)
    assert at(d, 1e-9)[0] == pytest.approx(1.0)
    ap = FactoredTf((io_term(1.0), mirror(1.0, -1)))
    assert at(ap, 1.0)[0] == pytest.approx(-1j)
    w = log_grid(1e-3, 1e3, 30)
    np.testing.assert_allclose(np.abs(at(ap, w)), 1.0, rtol=1e-12)


def test_mirror_pair_closed_form():
    z = 2 * cmath.exp(1j * 0.4)
    w0, phi = abs(z), cmath.phase(z)
    s = 1j * log_grid(1e-2, 1e2, 10)
    expected = w0 ** -2 * (s ** 2 + 2 * s * w0 * math.cos(phi) + w0 ** 2)
    np.testing.assert_allclose(mirror(z).evaluate(s), expected, rtol=1e-12)


# pairs ------------------------------------------------------------------------

def test_expand_pair_closed_form_example():
    z = cmath.exp(1j * math.pi / 3)
    x, q = expand_pair(z, 2)
    np.testing.assert_allclose(pair_x_polynomial(z, Fraction(1, 2)).coeffs, [1, -math.sqrt(3), 1], atol=1e-12)
    s = 1j * log_grid(1e-2, 1e2, 10)
    np.testing.assert_allclose(x.evaluate(s), s - math.sqrt(3) * np.sqrt(s) + 1, rtol=1e-12)
    r = pseudo_roots(q.poly)
    np.testing.assert_allclose(np.abs(np.degrees(np.angle(r))), [150, 150], atol=1e-9)


def test_pair_worst_case_sector():
    z = cmath.exp(1j * (math.pi / 2 - 1e-9))
    q = pair_q_polynomial(z, 4)
    assert np.min(np.abs(np.angle(pseudo_roots(q)))) > math.pi / 8


def test_expand_pair_rejects_lhp():
    with pytest.raises(DomainError):
        expand_pair(-1 + 1j, 2)


rhp = st.tuples(st.floats(-2, 2), st.floats(-1.55, 1.55)).map(lambda t: 10 ** t[0] * cmath.exp(1j * t[1]))


@settings(max_examples=200, deadline=None)
@given(rhp, st.integers(2, 10))
def test_factorization_identities(z, nu):
    w = log_grid(1e-2 * abs(z), 1e2 * abs(z), 25)[:100]
    s = 1j * w
    x, q = expand_real(abs(z), nu)
    np.testing.assert_allclose(x.evaluate(s), io_term(abs(z)).evaluate(s) / q.evaluate(s), rtol=1e-10)
    if abs(z.imag) > 1e-6 * abs(z):
        xp, qp = expand_pair(z, nu)
        np.testing.assert_allclose(xp.evaluate(s), io_term(z).evaluate(s) / qp.evaluate(s), rtol=1e-10)
        assert matignon_stable(qp.poly).stable


# stable pairs -----------------------------------------------------------------

def test_stable_pair_example():
    p = cmath.exp(1j * 11 * math.pi / 20)
    sp = stable_pair_cancel(p, 2)
    assert abs(math.degrees(cmath.phase(sp.principal_roots[0]))) == pytest.approx(49.5, abs=1e-9)
    np.testing.assert_allclose(np.sort(np.abs(np.degrees(np.angle(sp.residual_roots)))), [130.5, 130.5], atol=1e-9)
    assert sp.residual_verdict.stable and sp.non_oscillating
    assert sp.implicit_compensator == ImplicitPower(p, Fraction(1, 2), pair=True)
    assert sp.implicit_residual.exponent == Fraction(-1, 2)


def test_stable_pair_identity():
    p = -0.514 + 16.346j
    sp = stable_pair_cancel(p, 3)
    s = 1j * log_grid(1e-2, 1e3, 20)
    P = ImplicitPower(p, -1, pair=True).evaluate(s)
    np.testing.assert_allclose(P * sp.compensator.evaluate(s), sp.residual.evaluate(s), rtol=1e-10)
    np.testing.assert_allclose(P * sp.implicit_compensator.evaluate(s), sp.implicit_residual.evaluate(s),
                               rtol=1e-10)


def test_stable_pair_oscillation_warning():
    # lightly damped pole close to the imaginary axis with a large nu leaves residual roots near arg pi/nu
    sp = stable_pair_cancel(cmath.exp(1j * 0.51 * math.pi), 6)
    assert all(np.abs(np.angle(sp.residual_roots)) > math.pi / 12)
    assert sp.non_oscillating == all(np.abs(np.angle(sp.residual_roots)) >= math.pi / 6)
    assert bool(sp.warnings) != sp.non_oscillating


def test_stable_pair_rejects_rhp():
    with pytest.raises(DomainError):
        stable_pair_cancel(1 + 1j, 2)


stable_p = st.tuples(st.floats(-2, 2), st.floats(1.58, 3.1), st.booleans()).map(
    lambda t: 10 ** t[0] * cmath.exp(1j * (t[1] if t[2] else -t[1])))


@settings(max_examples=100, deadline=None)
@given(stable_p, st.integers(2, 10))
def test_stable_pair_roots_in_sector(p, nu):
    sp = stable_pair_cancel(p, nu)
    assert np.all(np.abs(np.angle(sp.residual_roots)) > math.pi / (2 * nu))


# plans --------------------------------------------------------------------------

def test_plan_explicit_real():
    plan = plan_cancellation("real", 1.0, 2, "explicit")
    assert plan.compensator == PseudoPoly(q_polynomial(1.0, 2), -1)
    assert plan.residual == ExplicitX(1.0, Fraction(1, 2), 1)


def test_plan_implicit_and_mirror_residuals():
    s = 1j * log_grid(1e-2, 1e2, 10)
    for method in ("implicit", "mirror", "explicit"):
        for target, z in (("real", 1.0), ("pair", 1 + 2j)):
            plan = plan_cancellation(target, z, 3, method)
            lhs = plan.io_factor.evaluate(s) * plan.compensator_tf().evaluate(s)
            np.testing.assert_allclose(lhs, plan.residual_tf().evaluate(s), rtol=1e-10)


def test_plan_rejects_unknown():
    with pytest.raises(DomainError):
        plan_cancellation("zero", 1.0, 2)
    with pytest.raises(DomainError):
        plan_cancellation("real", 1.0, 2, "magic")


# asymptotics -------------------------------------------------------------------

def test_asymptotics_tables():
    a = asymptotics(ExplicitX(1.0, Fraction(1, 2)))
    assert (a.high_slope_db_dec, a.high_phase_deg) == pytest.approx((10.0, -135.0))
    b = asymptotics(ExplicitX(cmath.exp(0.3j), Fraction(1, 4), -1, pair=True))
    assert (b.high_slope_db_dec, b.high_phase_deg) == pytest.approx((-10.0, 315.0))
    c = asymptotics(ExplicitX(1.0, 1))
    assert (c.high_slope_db_dec, c.high_phase_deg) == pytest.approx((20.0, -90.0))
    _, xt = implicit_terms(1.0, 2)
    d = asymptotics(xt)
    assert (d.high_slope_db_dec, d.high_phase_deg) == pytest.approx((10.0, -135.0))


@pytest.mark.parametrize("f", [ExplicitX(1.0, Fraction(1, 3)), ExplicitX(2 + 1j, Fraction(1, 2), -1, pair=True),
                               ImplicitPower(1.0, Fraction(-1, 2), mirrored=True)])
def test_asymptotic_slope_numerically(f):
    z = abs(f.z)
    w1, w2 = 1e3 * z, 1e4 * z
    m1, m2 = 20 * np.log10(np.abs(at(f, [w1, w2])))
    assert m2 - m1 == pytest.approx(asymptotics(f).high_slope_db_dec, abs=0.5)
