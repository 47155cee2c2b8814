import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from vibratrak.model import (CubicDamping, HystereticState, Iwan, Jenkins, ModelError,
                             QuinticStiffness, SofteningDuffing, SofteningII,
                             StiffeningDuffing, SystemConfig, UnilateralSpring,
                             dimensionalize, eval_hysteretic_step, eval_instantaneous,
                             iwan_backbone, iwan_sliders, linearized_stiffness,
                             nondimensionalize, phi_max)
from vibratrak.presets import PRESETS, preset_system


def test_pointwise_laws_match_formulas():
    x = np.linspace(-2, 2, 9)
    v = np.linspace(1, -1, 9)
    f, dx, dv = eval_instantaneous(StiffeningDuffing(2.0), x, v)
    np.testing.assert_allclose(f, 2 * x**3)
    np.testing.assert_allclose(dx, 6 * x**2)
    f, _, _ = eval_instantaneous(QuinticStiffness(0.5), x, v)
    np.testing.assert_allclose(f, 0.5 * x**5)
    f, dx, dv = eval_instantaneous(CubicDamping(0.03), x, v)
    np.testing.assert_allclose(f, 0.03 * v**3)
    np.testing.assert_allclose(dv, 0.09 * v**2)
    assert not dx.any()
    f, dx, _ = eval_instantaneous(UnilateralSpring(0.5), x, v)
    np.testing.assert_allclose(f, np.maximum(0.5 * x, 0))
    assert dx[x == 0] == 0.5  # right limit at the kink


def test_softening_ii_matches_iwan_backbone_integral():
    # Monotonic loading of a continuum of sliders: integrate the density directly.
    k_t, F_s, chi, beta = 0.25, 0.2, -0.5, 0.3
    pmax = phi_max(F_s, k_t, chi, beta)
    B = beta + (chi + 1) / (chi + 2)
    R = F_s * (chi + 1) / (pmax**(chi + 2) * B)
    S = F_s * beta / (pmax * B)
    for x in (0.1 * pmax, 0.5 * pmax, 0.95 * pmax, 1.5 * pmax):
        ref = quad(lambda p: R * p**chi * min(p, x), 0, pmax, points=[min(x, pmax)],
                   epsabs=1e-13)[0] + S * min(x, pmax)
        got = iwan_backbone(Iwan(k_t, F_s, chi, beta), x)
        assert got == pytest.approx(ref, rel=1e-9)


def test_softening_ii_saturates_and_is_continuous():
    f = SofteningII(0.25, 0.2, chi=-0.5, beta=0.1)
    pmax = phi_max(f.F_s, f.k_t, f.chi, f.beta)
    below, _, _ = eval_instantaneous(f, pmax * (1 - 1e-9), 0.0)
    above, d, _ = eval_instantaneous(f, 3 * pmax, 0.0)
    assert float(below) == pytest.approx(0.2, rel=1e-6)
    assert float(above) == 0.2 and float(d) == 0.0
    neg, _, _ = eval_instantaneous(f, -3 * pmax, 0.0)
    assert float(neg) == -0.2


def test_iwan_sliders_carry_total_stiffness_and_strength():
    f = Iwan(0.25, 0.2, chi=-0.5, beta=0.2, n_sliders=50)
    s, w = iwan_sliders(f)
    assert s.size == 51
    assert w.sum() == pytest.approx(f.k_t, rel=1e-12)
    assert w @ s == pytest.approx(f.F_s, rel=1e-12)


def test_jenkins_stick_slip_cycle():
    f = Jenkins(1.0, 0.5)
    st_ = HystereticState.relaxed(f)
    out = []
    for x in (0.2, 0.5, 1.0, 0.8, 0.0, -1.0):
        val, st_, d = eval_hysteretic_step(f, x, st_)
        out.append((val, d))
    # stick, slip at 0.5, slip, unload by 0.2, stuck to -0.3 -> clipped -0.5
    np.testing.assert_allclose([o[0] for o in out], [0.2, 0.5, 0.5, 0.3, -0.5, -0.5])
    assert [o[1] for o in out] == [1.0, 0.0, 0.0, 1.0, 0.0, 0.0]


@given(st.lists(st.floats(-5, 5), min_size=1, max_size=30))
@settings(max_examples=60, deadline=None)
def test_hysteretic_force_bounded(xs):
    for f in (Jenkins(0.25, 0.2), Iwan(0.25, 0.2, chi=-0.5, n_sliders=10)):
        state = HystereticState.relaxed(f)
        for x in xs:
            val, state, d = eval_hysteretic_step(f, x, state)
            assert abs(val) <= f.F_s * (1 + 1e-12)
            assert 0 <= d <= f.k_t + 1e-12


def test_iwan_first_loading_follows_backbone():
    f = Iwan(0.25, 0.2, chi=-0.5, n_sliders=400)
    for x in (0.3, 1.0, 2.0, 4.0):
        val, _, _ = eval_hysteretic_step(f, x, HystereticState.relaxed(f))
        assert val == pytest.approx(float(iwan_backbone(f, x)), rel=5e-3)


def test_parameter_validation():
    with pytest.raises(ModelError):
        Iwan(0.25, 0.2, chi=-1.0)
    with pytest.raises(ModelError):
        SofteningII(0.25, 0.2, chi=0.5)
    with pytest.raises(ModelError):
        Jenkins(0.0, 0.2)
    with pytest.raises(ModelError):
        SystemConfig(m=1, c=0, k=1, force=None, H=3, Nt=1000)
    with pytest.raises(ModelError):
        SystemConfig(m=1, c=0, k=1, force=None, H=300, Nt=1024)
    with pytest.raises(ModelError):
        eval_instantaneous(Jenkins(1, 1), 0.0, 0.0)


def test_linearized_stiffness():
    assert linearized_stiffness(Jenkins(0.25, 0.2)) == 0.25
    assert linearized_stiffness(UnilateralSpring(0.5)) == 0.25
    assert linearized_stiffness(StiffeningDuffing(1.0)) == 0.0


@pytest.mark.parametrize("name", PRESETS)
def test_presets_have_unit_linearized_stiffness(name):
    sys = preset_system(name)
    assert sys.k_lin == pytest.approx(1.0)
    sc = nondimensionalize(sys)
    assert sc.omega0 == pytest.approx(1.0)
    assert sc.zeta0 == pytest.approx(0.005)


@pytest.mark.parametrize("name", PRESETS)
def test_scales_round_trip(name):
    sys = preset_system(name, H=4)
    back = dimensionalize(nondimensionalize(sys), sys.force.kind, H=4)
    assert back.force == sys.force
    for attr in ("m", "c", "k", "x_ref"):
        assert getattr(back, attr) == pytest.approx(getattr(sys, attr), rel=1e-14)


def test_iwan_normalized_slip_force():
    # nondimensional Iwan slip force, 0.2 / 2.4
    sc = nondimensionalize(preset_system("iwan"))
    assert sc.params["F_s"] == pytest.approx(0.083333, abs=5e-7)
    assert math.isclose(sc.params["k_t"], 0.25)


def test_softening_duffing_scaling_with_x_ref():
    sys = SystemConfig(m=2.0, c=0.1, k=8.0, force=SofteningDuffing(-0.5), x_ref=2.0)
    sc = nondimensionalize(sys)
    assert sc.omega0 == pytest.approx(2.0)
    assert sc.params["alpha"] == pytest.approx(-0.5 * 4 / 8)
    assert sc.F_hat(16.0) == pytest.approx(1.0)
