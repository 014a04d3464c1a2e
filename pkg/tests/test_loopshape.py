import math
from fractions import Fraction

import numpy as np
import pytest

from fracshape.approx import BandSpec, approximate_tf
from fracshape.compensate import plan_cancellation
from fracshape.errors import SingularityError
from fracshape.focore import FactoredTf, Gain, ImplicitPower, IORational, Monomial, log_grid
from fracshape.loopshape import (
    LoopSpec,
    NoCrossoverError,
    build_example_controllers,
    closed_loop_stability,
    controller_gain,
    example_loops,
    example_plant,
    example_templates,
    internal_stability,
    margins,
    pi_controller,
    sensitivities,
    tune_gain,
)

GRID = log_grid(1e-3, 1e3, 50)
REFERENCE_GAINS = {"C1": 0.68, "C2": 0.772, "C3": 1.091, "C4": 0.7245}


@pytest.fixture(scope="module")
def loops():
    return example_loops()


# sensitivities ----------------------------------------------------------------

def test_open_controller():
    G = example_plant()
    sens = sensitivities(LoopSpec(G, FactoredTf((Gain(0.0),))))
    np.testing.assert_allclose(sens.T(GRID).values, 0)
    np.testing.assert_allclose(sens.S_y(GRID).values, 1)
    np.testing.assert_allclose(sens.S_u(GRID).values, G.evaluate(1j * GRID))


def test_integral_action_limit(loops):
    T = sensitivities(loops["C1"]).T([1e-6]).values[0]
    assert abs(T) == pytest.approx(1.0, abs=1e-5)


def test_sensitivity_identity_all_loops(loops):
    for loop in loops.values():
        sens = sensitivities(loop)
        np.testing.assert_allclose(sens.T(GRID).values + sens.S_y(GRID).values, 1.0, atol=1e-12)


def test_sy_at_crossover(loops):
    L = loops["C3"].open_loop().evaluate(np.array([0.54j]))[0]
    assert abs(L) == pytest.approx(1.0, abs=1e-8)
    sy = sensitivities(loops["C3"]).S_y([0.54]).values[0]
    assert abs(sy) == pytest.approx(1 / abs(1 + L), rel=1e-12)


def test_return_difference_zero_raises():
    loop = LoopSpec(FactoredTf((Gain(1.0),)), FactoredTf((Gain(-1.0),)))
    with pytest.raises(SingularityError):
        sensitivities(loop).T([1.0])


# margins and tuning ---------------------------------------------------------

def test_example_gains(loops):
    for name, loop in loops.items():
        assert controller_gain(loop.controller) == pytest.approx(REFERENCE_GAINS[name], rel=5e-3)


def test_tuned_loops_cross_at_target(loops):
    for loop in loops.values():
        assert abs(loop.open_loop().evaluate(np.array([0.54j]))[0]) == pytest.approx(1.0, abs=1e-8)


def test_l1_margins(loops):
    m = margins(loops["C1"])
    assert m.omega_c == pytest.approx(0.54, abs=1e-6)
    assert m.gain_margin_db == pytest.approx(1.26, abs=0.05)
    assert m.omega_pi == pytest.approx(2.88, abs=0.05)
    assert m.phase_margin_deg == pytest.approx(83.5, abs=0.1)


def test_all_phase_margins(loops):
    for name, loop in loops.items():
        m = margins(loop)
        assert m.phase_margin_deg > 55
        if name != "C1":
            assert m.gain_margin_db > 3


def test_integrator_margins():
    m = margins(FactoredTf((Monomial(-1),)))
    assert m.omega_c == pytest.approx(1.0, rel=1e-9)
    assert m.phase_margin_deg == pytest.approx(90.0)
    assert math.isinf(m.gain_margin_db) and "no_phase_crossing" in m.flags
    assert m.to_dict()["gain_margin_db"] is None


def test_no_crossover():
    with pytest.raises(NoCrossoverError):
        margins(FactoredTf((Gain(0.1),)))


def test_omega_pi_independent_of_gain(loops):
    loop = loops["C1"]
    base = margins(loop)
    for k in (0.5, 0.8, 1.5, 2.0):
        m = margins(loop.with_gain(k))
        assert m.omega_pi == pytest.approx(base.omega_pi, rel=1e-6)


def test_margins_monotone_in_gain(loops):
    loop = loops["C3"]
    ks = np.linspace(0.5, 2.0, 7)
    ms = [margins(loop.with_gain(k)) for k in ks]
    assert all(np.diff([m.omega_c for m in ms]) > 0)
    assert all(np.diff([m.phase_margin_deg for m in ms]) < 0)


def test_tune_gain_scaling():
    tmpl = example_templates()["C1"]
    k1, res = tune_gain(LoopSpec(example_plant(), tmpl, True), 0.54)
    assert abs(res) <= 1e-10
    doubled = example_plant() * FactoredTf((Gain(2.0),))
    k2, _ = tune_gain(LoopSpec(doubled, tmpl, True), 0.54)
    assert k2 == pytest.approx(k1 / 2, rel=1e-12)
    assert k1 == pytest.approx(1 / (1.0799 * 1.3629), rel=1e-3)


def test_controller_structure():
    c = build_example_controllers()
    s = 1j * np.array([0.3, 1.0, 3.0])
    pi = pi_controller().evaluate(s)
    k = {n: controller_gain(tf) for n, tf in c.items()}
    np.testing.assert_allclose(c["C2"].evaluate(s), k["C2"] * pi / (1 + s), rtol=1e-12)
    np.testing.assert_allclose(c["C3"].evaluate(s), k["C3"] * pi / (1 + np.sqrt(s)), rtol=1e-12)
    np.testing.assert_allclose(c["C4"].evaluate(s), k["C4"] * pi / np.sqrt(1 + s), rtol=1e-12)


# internal stability -----------------------------------------------------------

def plant_hat():
    return FactoredTf((IORational((1.0,), (1.0, 5 / 6, 1 / 6)),))


def test_c3_partial_cancellation_stable():
    plan = plan_cancellation("real", 1.0, 2, "explicit")
    res = internal_stability(plan, plant_hat(), FactoredTf((Gain(1.0913), pi_controller())))
    assert res.criterion.stable and res.loop.internally_stable and res.loop.alpha == Fraction(1, 2)


def test_c3_criterion_agrees_with_io_pole_test(loops):
    plan = plan_cancellation("real", 1.0, 2, "explicit")
    fo = internal_stability(plan, plant_hat(), FactoredTf((Gain(1.0913), pi_controller())))
    loop = loops["C3"]
    c = approximate_tf(loop.controller, BandSpec())
    io = closed_loop_stability(loop.plant, FactoredTf((IORational(tuple(c.num), tuple(c.den)),)), negated=True)
    assert io.alpha == 1 and not io.approximated
    assert fo.stable and io.internally_stable


def test_c4_implicit_goes_through_approximation():
    plan = plan_cancellation("real", 1.0, 2, "implicit")
    res = internal_stability(plan, plant_hat(), FactoredTf((Gain(0.7244), pi_controller())))
    assert res.loop.approximated and res.stable and res.criterion is None


def test_zero_controller_stable_plant():
    plan = plan_cancellation("real", 1.0, 2, "explicit")
    res = internal_stability(plan, plant_hat(), FactoredTf((Gain(0.0),)))
    assert res.criterion.stable


def full_io_pair(kc=-2.0):
    unstable = ImplicitPower(1.0 + 0j, -1)          # (1 - s)^-1
    G = FactoredTf((unstable,))
    C = FactoredTf((ImplicitPower(1.0 + 0j, 1), Gain(kc)))
    return G, C


def test_full_io_cancellation_dichotomy():
    G, C = full_io_pair()
    v = closed_loop_stability(G, C)
    assert v.T.stable and v.S_y.stable
    assert not v.S_u.stable and not v.internally_stable


def test_partial_cancellation_of_unstable_pole_is_stable():
    plan = plan_cancellation("real", 1.0, 2, "explicit", k=-1)
    res = internal_stability(plan, FactoredTf((Gain(1.0),)), FactoredTf((Gain(-2.0),)))
    assert res.loop.T.stable and res.loop.S_u.stable and res.stable


def test_loop_json_round_trip(loops):
    d = loops["C3"].to_dict()
    assert LoopSpec.from_dict(d) == loops["C3"]
