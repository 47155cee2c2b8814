import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from vibratrak.continuation import ContinuationConfig
from vibratrak.hbm import hbm_residual
from vibratrak.presets import PRESETS, preset_system
from vibratrak.validation import random_state
from vibratrak.vprnm import (VprnmError, broadband_force, decomposition_check,
                             expected_phase, harmonic_phase, isolate, solve_vprnm,
                             superposition_force, truncate, vprnm_backbone, vprnm_residual,
                             wrap_phase)

z = sp.symbols("z")


def _cos(k):
    return (z**k + z**-k) / 2


def _sin(k):
    return (z**k - z**-k) / (2 * sp.I)


def fourier_pair(f, n):
    """Exact (cos, sin) coefficients of harmonic n of a Laurent polynomial in z = e^{it}."""
    c = complex(sp.N(sp.expand(f).coeff(z, n), 30))
    return 2 * c.real, -2 * c.imag


def sympy_broadband(law, X, n):
    """Negated harmonic-n coefficients of law(x) for x built from harmonics 0..n-1."""
    x = sp.nsimplify(X[0])
    for k in range(1, n):
        x += sp.nsimplify(X[2 * k - 1]) * _cos(k) + sp.nsimplify(X[2 * k]) * _sin(k)
    c, s = fourier_pair(law(x), n)
    return -c, -s


@pytest.mark.parametrize("name,law", [
    ("stiffening_duffing", lambda x: x**3),
    ("quintic", lambda x: x**5),
    ("softening_duffing", lambda x: sp.Rational(-1, 4000) * x**3),
])
def test_broadband_matches_symbolic(name, law):
    sys = preset_system(name, H=5)
    X = np.array([0.1, 0.7, -0.2, 0.25, 0.1, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0])
    for n in (3, 4):
        b = broadband_force(sys, X, 0.5, n)
        ref = sympy_broadband(law, X, n)
        np.testing.assert_allclose(b.vector, ref, rtol=1e-11, atol=1e-14)


def test_cubic_damping_broadband_symbolic():
    sys = preset_system("cubic_damping", H=3)
    w = 0.7
    X = np.array([0.0, 0.8, 0.3, 0.1, -0.2, 0.0, 0.0])
    xs = sum(sp.nsimplify(X[2 * k - 1]) * _cos(k) + sp.nsimplify(X[2 * k]) * _sin(k)
             for k in (1, 2))
    v = sp.nsimplify(w) * sp.I * z * sp.diff(xs, z)  # d/dt = i z d/dz
    ref = [-c for c in fourier_pair(sp.Rational(3, 100) * v**3, 3)]
    np.testing.assert_allclose(broadband_force(sys, X, w, 3).vector, ref, rtol=1e-11)


def test_broadband_ignores_harmonics_at_and_above_n():
    sys = preset_system("stiffening_duffing", H=5)
    rng = np.random.default_rng(1)
    X = random_state(rng, 5)
    Y = X.copy()
    Y[5:] = rng.normal(size=6)
    assert broadband_force(sys, X, 1.0, 3).vector == pytest.approx(
        broadband_force(sys, Y, 1.0, 3).vector, abs=1e-15)


@given(st.integers(0, 10_000), st.sampled_from(PRESETS), st.integers(2, 3))
@settings(max_examples=40, deadline=None)
def test_decomposition_identity(seed, name, n):
    sys = preset_system(name, H=3, n_sliders=12)
    X = random_state(np.random.default_rng(seed), 3, 2 * sys.x_ref)
    assert decomposition_check(sys, X, 0.4, n) <= 1e-12


@pytest.mark.parametrize("name", ["stiffening_duffing", "unilateral_spring", "jenkins"])
def test_superposition_vanishes_without_target_harmonic(name):
    # With harmonics n and up absent, the low-harmonic force is the whole force.
    sys = preset_system(name, H=4)
    X = random_state(np.random.default_rng(9), 4)
    X[5:] = 0.0
    np.testing.assert_allclose(superposition_force(sys, X, 1.0, 3, 3), 0, atol=1e-13)
    assert superposition_force(sys, X, 1.0, 0, 3)[1] == 0.0


def test_phase_helpers():
    assert wrap_phase(3 * np.pi / 2) == pytest.approx(-np.pi / 2)
    assert wrap_phase(np.pi) == pytest.approx(np.pi)
    X = np.array([0.0, 0.0, 0.0, 0.0, 2.0])
    assert harmonic_phase(X, 2) == pytest.approx(np.pi / 2)
    np.testing.assert_array_equal(truncate(np.arange(7.0), 2), [0, 1, 2, 0, 0, 0, 0])
    np.testing.assert_array_equal(isolate(np.arange(7.0), 2), [0, 0, 0, 3, 4, 0, 0])
    with pytest.raises(ValueError):
        harmonic_phase(np.zeros(5), 1)


def test_zero_broadband_raises():
    sys = preset_system("stiffening_duffing", H=3)
    X = np.array([0.0, 1.0, 0.0, 0.0, 0.0, 0.1, 0.0])
    b = broadband_force(sys, X, 1.0, 2)  # odd law, no static part
    assert b.magnitude <= 1e-15
    with pytest.raises(VprnmError):
        expected_phase(type(b)(2, 0.0, 0.0))
    with pytest.raises(VprnmError):
        vprnm_residual(sys, np.zeros(7), 1.0, 0.1, 3)


def test_augmented_jacobian_finite_difference():
    sys = preset_system("stiffening_duffing", H=3)
    X = random_state(np.random.default_rng(2), 3)
    r = vprnm_residual(sys, X, 0.4, 0.3, 3)
    h = 1e-6
    y = np.r_[X, 0.4, 0.3]
    for j in range(y.size):
        e = np.zeros_like(y)
        e[j] = h
        p, m = y + e, y - e
        fd = (vprnm_residual(sys, p[:-2], p[-2], p[-1], 3).R
              - vprnm_residual(sys, m[:-2], m[-2], m[-1], 3).R) / (2 * h)
        np.testing.assert_allclose(r.J[:, j], fd, atol=1e-7)


def test_solve_vprnm_point_is_orthogonal_resonance():
    sys = preset_system("stiffening_duffing", H=5)
    # hardening moves the 3:1 resonance well above omega0 / 3
    p, it = solve_vprnm(sys, 3, 1.0, omega_window=(1.2, 1.8),
                        cfg=ContinuationConfig(ds_max=0.05))
    assert it > 0
    assert abs(p.constraint) <= 1e-9
    assert np.max(np.abs(hbm_residual(sys, p.X, p.omega, p.F, jacobian=False).R)) <= 1e-8
    gap = wrap_phase(p.phi_n - p.fbroad_phase)
    assert abs(abs(gap) - np.pi / 2) <= 1e-6
    assert p.omega == pytest.approx(0.494, abs=0.01)


def test_solve_vprnm_guess_validation():
    sys = preset_system("stiffening_duffing", H=3)
    with pytest.raises(ValueError):
        solve_vprnm(sys, 3, 1.0, X_guess=np.zeros(7))
    with pytest.raises(ValueError):
        solve_vprnm(sys, 4, 1.0)


def test_backbone_points_satisfy_both_conditions():
    sys = preset_system("jenkins", H=3)
    bb = vprnm_backbone(sys, 3, (0.9, 20.0), ContinuationConfig(ds_max=0.1))
    assert bb.status == "complete"
    assert bb.F[0] == pytest.approx(0.9) and bb.F[-1] >= 20.0 * (1 - 1e-12)
    for p in bb:
        assert abs(p.constraint) <= 1e-8 * sys.x_ref
        assert p.residual_norm <= 1e-8
    assert bb.newton_iterations > len(bb)
    with pytest.raises(ValueError):
        vprnm_backbone(sys, 3, (2.0, 1.0))
