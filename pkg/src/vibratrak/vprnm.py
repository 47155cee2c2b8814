"""
Superharmonic resonance tracking by variable phase resonance.

The nonlinear force on harmonic ``n`` splits into the force of the ``n``-th
harmonic motion alone, a broadband excitation generated by harmonics
``0 .. n-1`` and a superposition correction::

    F_n{f(x)} = F_n{f(x_n)} - F_broad,n - F_sup,n

A superharmonic resonance is declared where the ``n``-th harmonic response is
orthogonal to the broadband excitation. Adding that scalar constraint to the
harmonic balance equations and treating frequency as unknown gives a square
system whose solutions are followed over the forcing amplitude.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .aft import nonlinear_force
from .continuation import ContinuationConfig, compute_frc, continue_branch, frc_arrays
from .hbm import (NonConvergence, hbm_residual, linear_response, newton_step, residual_scale,
                  solve_hbm)


class VprnmError(ValueError):
    """The broadband excitation vanishes, so no resonance phase is defined."""


def wrap_phase(phi):
    """Wrap angles to ``(-pi, pi]``."""
    return np.pi - np.mod(np.pi - np.asarray(phi, dtype=float), 2 * np.pi)


def harmonic_phase(X, k):
    """Phase ``phi_k`` of ``X_k cos(k w t - phi_k)``, i.e. ``atan2(X_ks, X_kc)``."""
    c, s = X[2 * k - 1], X[2 * k]
    if c == 0 and s == 0:
        raise ValueError(f"harmonic {k} is zero; its phase is undefined")
    return float(wrap_phase(math.atan2(s, c)))


def _harmonic_slice(n):
    return slice(2 * n - 1, 2 * n + 1)


def truncate(X, n):
    """Copy of ``X`` keeping harmonics ``0 .. n-1``."""
    Xt = np.array(X, dtype=float)
    Xt[2 * n - 1:] = 0.0
    return Xt


def isolate(X, n):
    """Copy of ``X`` keeping only harmonic ``n``."""
    Xn = np.zeros(len(X))
    Xn[_harmonic_slice(n)] = X[_harmonic_slice(n)]
    return Xn


@dataclass
class BroadbandForce:
    """Broadband excitation of harmonic ``n``.

    ``phase`` is ``atan2(Fs, Fc)``. ``dX`` (2 x (2H+1)) and ``domega`` (2,) are
    derivatives of ``(Fc, Fs)`` when requested.
    """

    n: int
    Fc: float
    Fs: float
    dX: Optional[np.ndarray] = None
    domega: Optional[np.ndarray] = None

    @property
    def vector(self):
        return np.array([self.Fc, self.Fs])

    @property
    def magnitude(self):
        return math.hypot(self.Fc, self.Fs)

    @property
    def phase(self):
        return math.atan2(self.Fs, self.Fc)


def _check_harmonic(sys_H, n, lowest=2):
    if not lowest <= n <= sys_H:
        raise ValueError(f"harmonic {n} must lie in [{lowest}, H={sys_H}]")


def broadband_force(sys, X, omega, n, *, jacobian=False):
    """Excitation of harmonic ``n`` by harmonics ``0 .. n-1`` of ``X``."""
    _check_harmonic(sys.H, n)
    X = np.asarray(X, dtype=float)
    res = nonlinear_force(sys.force, truncate(X, n), omega, sys.Nt, jacobian=jacobian)
    sl = _harmonic_slice(n)
    Fc, Fs = -res.F[sl]
    b = BroadbandForce(n, float(Fc), float(Fs))
    if jacobian:
        dX = -res.dF_dX[sl].copy()
        dX[:, 2 * n - 1:] = 0.0
        b.dX = dX
        b.domega = -res.dF_domega[sl]
    return b


def superposition_force(sys, X, omega, k, n):
    """Superposition correction ``-F_k{f(x) - f(x_n) - f(x_0..n-1)}``.

    Returns the (cosine, sine) pair of harmonic ``k``; for ``k = 0`` the sine
    entry is zero.
    """
    _check_harmonic(sys.H, n)
    if not 0 <= k <= sys.H:
        raise ValueError(f"harmonic {k} must lie in [0, H={sys.H}]")
    X = np.asarray(X, dtype=float)
    f = sys.force
    full = nonlinear_force(f, X, omega, sys.Nt, jacobian=False).F
    only = nonlinear_force(f, isolate(X, n), omega, sys.Nt, jacobian=False).F
    low = nonlinear_force(f, truncate(X, n), omega, sys.Nt, jacobian=False).F
    d = -(full - only - low)
    if k == 0:
        return np.array([d[0], 0.0])
    return d[_harmonic_slice(k)].copy()


def decomposition_check(sys, X, omega, n):
    """Largest defect of ``F_n{f(x)} = F_n{f(x_n)} - F_broad,n - F_sup,n``."""
    X = np.asarray(X, dtype=float)
    sl = _harmonic_slice(n)
    full = nonlinear_force(sys.force, X, omega, sys.Nt, jacobian=False).F[sl]
    only = nonlinear_force(sys.force, isolate(X, n), omega, sys.Nt, jacobian=False).F[sl]
    broad = broadband_force(sys, X, omega, n).vector
    sup = superposition_force(sys, X, omega, n, n)
    return float(np.max(np.abs(full - (only - broad - sup))))


def expected_phase(broad):
    """Resonant phase of harmonic ``n``: a quarter period after the excitation."""
    if broad.magnitude == 0:
        raise VprnmError(f"broadband excitation of harmonic {broad.n} vanishes; "
                         "the resonance phase is undefined")
    return float(wrap_phase(broad.phase + np.pi / 2))


# --------------------------------------------------------------------------
# Augmented system
# --------------------------------------------------------------------------

@dataclass
class VprnmResidual:
    """Augmented residual ``[R_hbm, g]`` and Jacobian with columns ``[X, omega, F]``."""

    R: np.ndarray
    J: np.ndarray
    broad: BroadbandForce

    @property
    def constraint(self):
        return float(self.R[-1])


def vprnm_residual(sys, X, omega, F, n):
    """Harmonic balance residual with the orthogonality constraint appended.

    The constraint ``g = (F_broad,n / |F_broad,n|) . [X_nc, X_ns]`` has
    displacement units.

    Raises
    ------
    VprnmError
        If the broadband excitation vanishes.
    """
    X = np.asarray(X, dtype=float)
    N = X.size
    hb = hbm_residual(sys, X, omega, F)
    b = broadband_force(sys, X, omega, n, jacobian=True)
    mag = b.magnitude
    if not mag > 0:
        raise VprnmError(f"broadband excitation of harmonic {n} vanishes at "
                         f"omega={omega:g}, F={F:g}")
    u = b.vector / mag
    sl = _harmonic_slice(n)
    Xn = X[sl]
    g = u @ Xn
    # d(u)/d(Fb) projects out the radial direction.
    P = (np.eye(2) - np.outer(u, u)) / mag
    dg_dFb = P @ Xn
    R = np.r_[hb.R, g]
    J = np.zeros((N + 1, N + 2))
    J[:N, :N] = hb.dR_dX
    J[:N, N] = hb.dR_domega
    J[:N, N + 1] = hb.dR_dF
    J[N, :N] = dg_dFb @ b.dX
    J[N, sl] += u
    J[N, N] = dg_dFb @ b.domega
    return VprnmResidual(R, J, b)


@dataclass
class VprnmPoint:
    """Converged superharmonic resonance point (dimensional)."""

    F: float
    omega: float
    X: np.ndarray
    phi_n: float
    fbroad_magnitude: float
    fbroad_phase: float
    constraint: float
    residual_norm: float


class VprnmBackbone(list):
    """Ordered :class:`VprnmPoint` list with the underlying branch diagnostics."""

    def __init__(self, points=(), n=None, branch=None, seed_iterations=0):
        super().__init__(points)
        self.n = n
        self.branch = branch
        self.seed_iterations = seed_iterations

    @property
    def status(self):
        return self.branch.status if self.branch is not None else "complete"

    @property
    def message(self):
        return self.branch.message if self.branch is not None else ""

    @property
    def newton_iterations(self):
        """Newton iterations of the seed plus all continuation correctors."""
        it = self.branch.newton_iterations if self.branch is not None else 0
        return it + self.seed_iterations

    @property
    def F(self):
        return np.array([p.F for p in self])

    @property
    def omega(self):
        return np.array([p.omega for p in self])

    @property
    def X(self):
        return np.array([p.X for p in self])

    @property
    def phi_n(self):
        """Resonant phase series, unwrapped for continuity."""
        return np.unwrap([p.phi_n for p in self])


class _Scaled:
    """Nondimensional view ``y = [X/x_ref, omega/omega0, lam]`` of the system.

    ``lam`` is ``F/(k_lin x_ref)`` or its natural log.
    """

    def __init__(self, sys, n, log_force):
        self.sys, self.n, self.log_force = sys, n, log_force
        self.x_ref = sys.x_ref
        self.omega0 = math.sqrt(sys.k_lin / sys.m)
        self.fu = residual_scale(sys)

    def lam(self, F):
        F_hat = F / self.fu
        return math.log(F_hat) if self.log_force else F_hat

    def F(self, lam):
        return (math.exp(lam) if self.log_force else lam) * self.fu

    def to_y(self, X, omega, F):
        return np.r_[np.asarray(X) / self.x_ref, omega / self.omega0, self.lam(F)]

    def from_y(self, y):
        return y[:-2] * self.x_ref, y[-2] * self.omega0, self.F(y[-1])

    def __call__(self, y):
        X, omega, F = self.from_y(y)
        r = vprnm_residual(self.sys, X, omega, F, self.n)
        N = X.size
        R = r.R.copy()
        R[:N] /= self.fu
        R[N] /= self.x_ref
        J = r.J.copy()
        J[:N] /= self.fu
        J[N] /= self.x_ref
        J[:, :N] *= self.x_ref
        J[:, N] *= self.omega0
        J[:, N + 1] *= F if self.log_force else self.fu
        return R, J


def _point(sys, scaled, y, n):
    X, omega, F = scaled.from_y(y)
    r = vprnm_residual(sys, X, omega, F, n)
    N = X.size
    return VprnmPoint(
        F=F, omega=omega, X=X,
        phi_n=harmonic_phase(X, n) if np.any(X[_harmonic_slice(n)]) else float("nan"),
        fbroad_magnitude=r.broad.magnitude,
        fbroad_phase=r.broad.phase,
        constraint=r.constraint,
        residual_norm=float(max(np.max(np.abs(r.R[:N])) / scaled.fu,
                                abs(r.R[N]) / scaled.x_ref)))


def bracket_resonance(sys, n, F, omega_window=(0.75, 1.35), cfg=None):
    """Locate a sign change of the orthogonality constraint along an FRC.

    The FRC at ``F`` is traced over ``omega_window`` times ``omega0 / n``; the
    crossing with the largest ``|X_n|`` is linearly interpolated.

    Returns
    -------
    X, omega, iterations
        Interpolated guess and the Newton iterations spent tracing.
    """
    omega0 = math.sqrt(sys.k_lin / sys.m)
    lo, hi = omega_window[0] * omega0 / n, omega_window[1] * omega0 / n
    branch = compute_frc(sys, F, (lo, hi), cfg)
    omega, X = frc_arrays(sys, branch)
    g = np.full(len(branch), np.nan)
    for i, (Xi, wi) in enumerate(zip(X, omega)):
        b = broadband_force(sys, Xi, wi, n)
        if b.magnitude > 0:
            g[i] = b.vector @ Xi[_harmonic_slice(n)] / b.magnitude
    amp = np.hypot(*X[:, _harmonic_slice(n)].T)
    best = None
    for i in range(len(g) - 1):
        if np.isfinite(g[i]) and np.isfinite(g[i + 1]) and g[i] * g[i + 1] <= 0:
            if best is None or max(amp[i], amp[i + 1]) > best[0]:
                s = g[i] / (g[i] - g[i + 1]) if g[i] != g[i + 1] else 0.0
                best = (max(amp[i], amp[i + 1]), X[i] + s * (X[i + 1] - X[i]),
                        omega[i] + s * (omega[i + 1] - omega[i]))
    if best is None:
        raise NonConvergence(
            f"no {n}:1 resonance found between omega={lo:g} and {hi:g} at F={F:g}; "
            "adjust the force range or frequency window", None, np.inf,
            branch.newton_iterations)
    return best[1], best[2], branch.newton_iterations


def solve_vprnm(sys, n, F, X_guess=None, omega_guess=None, tol=1e-9, max_iter=40, *,
                omega_window=(0.75, 1.35), cfg=None):
    """Solve the augmented system for ``(X, omega)`` at fixed force ``F``.

    Without guesses the start is bracketed on an FRC traced with the step
    settings ``cfg`` (see :func:`bracket_resonance`). Returns
    ``(VprnmPoint, iterations)``.
    """
    _check_harmonic(sys.H, n)
    scaled = _Scaled(sys, n, log_force=False)
    it0 = 0
    if X_guess is None and omega_guess is None:
        X_guess, omega_guess, it0 = bracket_resonance(sys, n, F, omega_window, cfg)
    elif X_guess is None:
        sol = solve_hbm(sys, linear_response(sys, omega_guess, F), omega_guess, F,
                        tol=tol, max_iter=max_iter, full_output=True)
        X_guess, it0 = sol.X, sol.iterations
    elif omega_guess is None:
        raise ValueError("an X guess needs a matching omega guess")
    y = scaled.to_y(X_guess, omega_guess, F)
    N = len(y) - 2

    def square(u):
        R, J = scaled(np.r_[u, y[-1]])
        return R, J[:, :-1]

    u = y[:-1]
    R, J = square(u)
    norm = np.max(np.abs(R))
    it = 0
    while norm > tol:
        if it == max_iter:
            raise NonConvergence(
                f"VPRNM seed did not converge at F={F:g} (residual {norm:.3e})",
                u[:N] * scaled.x_ref, norm, it + it0)
        it += 1
        d = newton_step(J, R)
        step, first = 1.0, None
        for _ in range(9):
            u_try = u + step * d
            try:
                R_try, J_try = square(u_try)
                n_try = np.max(np.abs(R_try))
            except ValueError:
                n_try = np.inf
            if first is None and np.isfinite(n_try):
                first = (u_try, R_try, J_try, n_try)
            if n_try < norm:
                first = (u_try, R_try, J_try, n_try)
                break
            step *= 0.5
        if first is None:
            raise NonConvergence(f"VPRNM seed diverged at F={F:g}",
                                 u[:N] * scaled.x_ref, norm, it + it0)
        u, R, J, norm = first
    return _point(sys, scaled, np.r_[u, y[-1]], n), it + it0


def vprnm_backbone(sys, n, F_range, cfg=None, *, log_force=True, seed=None,
                   omega_window=(0.75, 1.35)):
    """Trace the ``n``:1 resonance over forcing amplitudes ``F_range`` (dimensional).

    Parameters
    ----------
    sys : SystemConfig
    n : int
        Superharmonic order, ``2 <= n <= H``.
    F_range : (float, float)
        Force interval; the backbone is seeded at its lower end.
    cfg : ContinuationConfig, optional
        Step settings; ``lam_range`` is overwritten from ``F_range``.
    log_force : bool
        Continue in ``log(F)`` rather than ``F``.
    seed : VprnmPoint, optional
        Converged start at ``F_range[0]``.
    omega_window : (float, float)
        Seed search interval as multiples of ``omega0 / n``.

    Returns
    -------
    VprnmBackbone
    """
    F_lo, F_hi = F_range
    if not 0 < F_lo <= F_hi:
        raise ValueError("F_range must satisfy 0 < low <= high")
    scaled = _Scaled(sys, n, log_force)
    seed_it = 0
    if seed is None:
        step = None if cfg is None else ContinuationConfig(
            **{**cfg.__dict__, "lam_scale": None})
        seed, seed_it = solve_vprnm(sys, n, F_lo, omega_window=omega_window, cfg=step)
    lam_range = (scaled.lam(F_lo), scaled.lam(F_hi))
    cfg = ContinuationConfig(lam_range=lam_range) if cfg is None else \
        ContinuationConfig(**{**cfg.__dict__, "lam_range": lam_range})
    y0 = scaled.to_y(seed.X, seed.omega, seed.F)
    y0[-1] = lam_range[0]
    branch = continue_branch(scaled, y0, cfg)
    pts = [_point(sys, scaled, p.y, n) for p in branch]
    return VprnmBackbone(pts, n=n, branch=branch, seed_iterations=seed_it)
