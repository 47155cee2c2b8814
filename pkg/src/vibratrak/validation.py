"""
Property suites run by ``vibratrak validate`` and by the test-suite.

Each check draws its own seeded random states, so a run is reproducible.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .aft import (aft, aft_fast_hysteretic, harmonic_coefficients, nonlinear_force,
                  synthesize_time_series)
from .analysis import analytic_fbroad
from .continuation import ContinuationConfig
from .hbm import hbm_residual, linear_response, residual_scale, solve_hbm
from .model import CONSERVATIVE, ODD, SystemConfig, is_hysteretic
from .presets import PRESETS, preset_system
from .vprnm import broadband_force, decomposition_check, vprnm_backbone

__all__ = ["CheckResult", "CHECKS", "run_checks", "random_state"]


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


def random_state(rng, H, scale=1.0, odd_only=False, static=True):
    """Random harmonic vector with decaying harmonic amplitudes."""
    X = np.zeros(2 * H + 1)
    if static and not odd_only:
        X[0] = rng.normal(0, 0.2 * scale)
    for k in range(1, H + 1):
        if odd_only and k % 2 == 0:
            continue
        X[2 * k - 1:2 * k + 1] = rng.normal(0, scale / k, 2)
    return X


def _systems(H=3, Nt=1024, n_sliders=40):
    return {name: preset_system(name, H=H, Nt=Nt, n_sliders=n_sliders) for name in PRESETS}


def check_round_trip(seed=0, draws=50):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(draws):
        H = int(rng.integers(1, 16))
        X = random_state(rng, H)
        x, _ = synthesize_time_series(X, 1.0, 1024)
        worst = max(worst, float(np.max(np.abs(harmonic_coefficients(x, H) - X))))
    return worst <= 1e-12, f"max round-trip error {worst:.2e}"


def check_oddness(seed=1, draws=20):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for sys in _systems(H=5).values():
        if not isinstance(sys.force, ODD):
            continue
        for _ in range(draws):
            X = random_state(rng, 5, sys.x_ref, odd_only=True)
            F = nonlinear_force(sys.force, X, 0.3, sys.Nt, jacobian=False).F
            even = np.r_[F[0], F[3:5], F[7:9]]
            worst = max(worst, float(np.max(np.abs(even))))
    return worst <= 1e-12, f"max even-harmonic force {worst:.2e}"


def cycle_work(X, F):
    """Net work per cycle ``pi * sum_n n (F_nc X_ns - F_ns X_nc)`` up to the factor pi."""
    n = np.arange(1, (len(X) - 1) // 2 + 1)
    return float(np.sum(n * (F[1::2] * X[2::2] - F[2::2] * X[1::2])))


def check_conservative_work(seed=2, draws=20):
    # Polynomial laws are aliasing-free, so the sampled work is zero to
    # rounding. Laws with a slope discontinuity carry a sampling error that
    # must shrink as the period is sampled more finely.
    rng = np.random.default_rng(seed)
    smooth, kinked = 0.0, {}
    for name, sys in _systems().items():
        if not isinstance(sys.force, CONSERVATIVE):
            continue
        kink = name in ("softening_ii", "unilateral_spring")
        for Nt in ((1024, 16384) if kink else (1024,)):
            worst = 0.0
            for _ in range(draws):
                X = random_state(rng, 3, sys.x_ref)
                F = nonlinear_force(sys.force, X, 0.4, Nt, jacobian=False).F
                scale = max(1.0, float(np.max(np.abs(F))) * float(np.max(np.abs(X))))
                worst = max(worst, abs(cycle_work(X, F)) / scale)
            if kink:
                kinked.setdefault(name, []).append(worst)
            else:
                smooth = max(smooth, worst)
    ok = smooth <= 1e-10 and all(a <= 1e-4 and b <= a / 10 for a, b in kinked.values())
    parts = ", ".join(f"{k} {a:.1e} -> {b:.1e}" for k, (a, b) in kinked.items())
    return ok, f"smooth laws {smooth:.2e}; kinked laws (Nt 1024 -> 16384) {parts}"


def _fd_error(fn, X, J, h, rng, directions=4):
    # Directional central differences; skip directions whose one-sided
    # differences disagree (a stick/slip or kink crossing).
    errs, skipped = [], 0
    for _ in range(directions):
        d = rng.normal(size=X.size)
        d /= np.linalg.norm(d)
        f0, fp, fm = fn(X), fn(X + h * d), fn(X - h * d)
        fwd, bwd = (fp - f0) / h, (f0 - fm) / h
        ref = np.linalg.norm(J @ d)
        tol = 1e-4 * max(ref, 1e-12)
        if np.linalg.norm(fwd - bwd) > max(tol, 1e-6 * max(1.0, np.linalg.norm(f0))):
            skipped += 1
            continue
        cd = (fp - fm) / (2 * h)
        errs.append(np.linalg.norm(cd - J @ d) / max(ref, np.linalg.norm(cd), 1e-8))
    return (max(errs) if errs else 0.0), skipped


def check_jacobians(seed=3, draws=6):
    rng = np.random.default_rng(seed)
    worst, skipped, tested = 0.0, 0, 0
    for name, sys in _systems().items():
        omega = 0.37
        for _ in range(draws):
            X = random_state(rng, 3, 1.3 * sys.x_ref)
            res = nonlinear_force(sys.force, X, omega, sys.Nt)
            fn = lambda Y: nonlinear_force(sys.force, Y, omega, sys.Nt, jacobian=False).F
            h = 1e-6 * sys.x_ref
            e, s = _fd_error(fn, X, res.dF_dX, h, rng)
            worst, skipped, tested = max(worst, e), skipped + s, tested + 4 - s
            if not is_hysteretic(sys.force):
                fw = lambda w: nonlinear_force(sys.force, X, w, sys.Nt, jacobian=False).F
                cd = (fw(omega + 1e-6) - fw(omega - 1e-6)) / 2e-6
                ref = max(np.linalg.norm(cd), np.linalg.norm(res.dF_domega), 1e-8)
                worst = max(worst, np.linalg.norm(cd - res.dF_domega) / ref)
    ok = worst <= 1e-5 and tested > skipped
    return ok, f"max relative error {worst:.2e} ({tested} directions, {skipped} crossing)"


def check_fast_equivalence(seed=4, draws=100):
    rng = np.random.default_rng(seed)
    worst_F = worst_J = 0.0
    bound_ok = True
    systems = [s for s in _systems().values() if is_hysteretic(s.force)]
    for i in range(draws):
        sys = systems[i % len(systems)]
        X = random_state(rng, 3, rng.uniform(0.2, 6.0) * sys.x_ref)
        ref = aft(sys.force, X, 0.3, sys.Nt)
        fast = aft_fast_hysteretic(sys.force, X, 0.3, sys.Nt)
        worst_F = max(worst_F, float(np.max(np.abs(ref.F - fast.F))))
        worst_J = max(worst_J, float(np.max(np.abs(ref.dF_dX - fast.dF_dX))))
        bound_ok &= fast.critical_path <= 2 * (2 * sys.H) + 1
    ok = worst_F <= 1e-12 and worst_J <= 1e-12 and bound_ok
    return ok, (f"max force diff {worst_F:.2e}, max Jacobian diff {worst_J:.2e}, "
                f"critical-path bound {'held' if bound_ok else 'violated'}")


_ORACLES = (
    ("stiffening_duffing", {"alpha": 1.0}),
    ("softening_duffing", {"alpha": -2.5e-4}),
    ("quintic", {"eta": 1.0}),
    ("unilateral_spring", {"k_nl": 0.5}),
    ("cubic_damping", {"gamma": 0.03}),
)


def oracle_errors(amplitudes=np.geomspace(0.05, 5.0, 20), omega=0.3):
    """Worst relative errors of the numerical broadband force against closed forms.

    Returns ``{(kind, n, secondary): error}``.
    """
    out = {}
    for kind, params in _ORACLES:
        sys = preset_system(kind, H=5)
        primary = 2 if kind == "unilateral_spring" else 3
        secondary = 4 if kind == "unilateral_spring" else 5
        for n, with_x3 in ((primary, False), (secondary, kind != "unilateral_spring")):
            worst = 0.0
            for X1 in amplitudes:
                X = np.zeros(sys.n_dof)
                X[1] = X1
                X3 = None
                if with_x3:
                    X3 = 0.3 * X1
                    phi3 = broadband_force(sys, X, omega, 3).phase
                    X[5], X[6] = X3 * np.cos(phi3), X3 * np.sin(phi3)
                num = broadband_force(sys, X, omega, n).vector
                ref = np.array(analytic_fbroad(kind, params, X1, X3, omega, n))
                worst = max(worst, float(np.linalg.norm(num - ref) / np.linalg.norm(ref)))
            out[(kind, n, with_x3)] = worst
    return out


def check_oracles():
    errs = oracle_errors()
    bad = [k for k, e in errs.items()
           if e > (1e-3 if k[0] == "unilateral_spring" else 1e-10)]
    worst = max(errs.values())
    return not bad, f"worst relative error {worst:.2e}" + (f"; failing {bad}" if bad else "")


def check_decomposition(seed=5, draws=100):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for sys in _systems(n_sliders=20).values():
        for _ in range(draws // 10):
            X = random_state(rng, 3, 2 * sys.x_ref)
            for n in (2, 3):
                scale = max(1.0, float(np.max(np.abs(
                    nonlinear_force(sys.force, X, 0.3, sys.Nt, jacobian=False).F))))
                worst = max(worst, decomposition_check(sys, X, 0.3, n) / scale)
    return worst <= 1e-10, f"max decomposition defect {worst:.2e}"


def check_linear_frf():
    sys = SystemConfig(m=1.0, c=0.01, k=1.0, force=None, H=3)
    worst = 0.0
    for omega in np.linspace(0.1, 2.0, 40):
        X = solve_hbm(sys, np.zeros(sys.n_dof), omega, 1.0, tol=1e-13)
        ref = linear_response(sys, omega, 1.0)
        worst = max(worst, float(np.linalg.norm(X - ref) / np.linalg.norm(ref)))
    return worst <= 1e-10, f"max relative error {worst:.2e}"


def check_unilateral_scaling():
    sys = preset_system("unilateral_spring", H=6)
    worst = 0.0
    for omega in (0.3, 0.45, 0.6):
        X1 = solve_hbm(sys, linear_response(sys, omega, 1.0), omega, 1.0, tol=1e-12)
        X2 = solve_hbm(sys, 2 * X1, omega, 2.0, tol=1e-12)
        X3 = solve_hbm(sys, 0.25 * X1, omega, 0.25, tol=1e-12)
        worst = max(worst, np.linalg.norm(X2 - 2 * X1) / np.linalg.norm(X2),
                    np.linalg.norm(X3 - 0.25 * X1) / np.linalg.norm(X3))
    return worst <= 1e-8, f"max deviation from proportional scaling {worst:.2e}"


def check_backbones():
    cases = (("stiffening_duffing", 3, (0.1, 2.0)), ("jenkins", 3, (0.9, 10.0)))
    worst_g = worst_r = 0.0
    points = 0
    for name, n, (lo, hi) in cases:
        sys = preset_system(name, H=3)
        fu = residual_scale(sys)
        bb = vprnm_backbone(sys, n, (lo * fu, hi * fu), ContinuationConfig(ds_max=0.1))
        for p in bb:
            r = hbm_residual(sys, p.X, p.omega, p.F, jacobian=False).R
            worst_r = max(worst_r, float(np.max(np.abs(r))) / fu)
            worst_g = max(worst_g, abs(p.constraint) / sys.x_ref)
            points += 1
    ok = worst_g <= 1e-8 and worst_r <= 1e-8
    return ok, (f"{points} backbone points: max |g| {worst_g:.2e}, "
                f"max HBM residual {worst_r:.2e}")


CHECKS: dict[str, Callable] = {
    "transform_round_trip": check_round_trip,
    "odd_force_symmetry": check_oddness,
    "conservative_zero_work": check_conservative_work,
    "jacobian_finite_difference": check_jacobians,
    "fast_hysteretic_equivalence": check_fast_equivalence,
    "closed_form_excitation": check_oracles,
    "force_decomposition": check_decomposition,
    "linear_frf": check_linear_frf,
    "unilateral_proportional_scaling": check_unilateral_scaling,
    "backbone_orthogonality_and_membership": check_backbones,
}


def run_checks(names=None):
    """Run the named checks (all by default) and return :class:`CheckResult` list."""
    names = list(CHECKS) if names is None else list(names)
    unknown = [n for n in names if n not in CHECKS]
    if unknown:
        raise KeyError(f"unknown checks: {', '.join(unknown)}")
    out = []
    for name in names:
        t0 = time.perf_counter()
        try:
            ok, detail = CHECKS[name]()
        except Exception as exc:  # a crash is a failed check, not an abort
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        out.append(CheckResult(name, bool(ok), detail, time.perf_counter() - t0))
    return out
