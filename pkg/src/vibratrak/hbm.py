"""
Harmonic balance residual and a damped Newton solver for a single point.

For harmonic vector ``X`` the discrete equations read
``R = E(omega) X + F_nl(X, omega) - F_ext(F) = 0`` where ``E`` is block
diagonal with the dynamic stiffness of each harmonic and ``F_ext`` has the
forcing amplitude in the ``X1c`` slot.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .aft import nonlinear_force


class NonConvergence(RuntimeError):
    """Newton iteration failed; carries the best iterate found."""

    def __init__(self, message, X=None, residual_norm=np.inf, iterations=0):
        super().__init__(message)
        self.X = X
        self.residual_norm = residual_norm
        self.iterations = iterations


@dataclass
class HbmResidual:
    """Residual and its derivatives with respect to ``X``, ``omega`` and ``F``."""

    R: np.ndarray
    dR_dX: Optional[np.ndarray] = None
    dR_domega: Optional[np.ndarray] = None
    dR_dF: Optional[np.ndarray] = None


@dataclass
class HbmSolution:
    X: np.ndarray
    residual_norm: float
    iterations: int


def dynamic_stiffness_block(sys, omega, n):
    """Linear dynamic stiffness of harmonic ``n`` (1x1 for ``n = 0``)."""
    if n == 0:
        return np.array([[sys.k]], dtype=float)
    w = n * omega
    d = sys.k - w * w * sys.m
    return np.array([[d, w * sys.c], [-w * sys.c, d]])


def dynamic_stiffness(sys, omega):
    """Block-diagonal dynamic stiffness ``E(omega)`` and ``dE/domega``."""
    H = sys.H
    E = np.zeros((2 * H + 1, 2 * H + 1))
    dE = np.zeros_like(E)
    E[0, 0] = sys.k
    for n in range(1, H + 1):
        i = 2 * n - 1
        E[i:i + 2, i:i + 2] = dynamic_stiffness_block(sys, omega, n)
        dE[i:i + 2, i:i + 2] = [[-2 * n * n * omega * sys.m, n * sys.c],
                                [-n * sys.c, -2 * n * n * omega * sys.m]]
    return E, dE


def external_force(sys, F):
    """Harmonic vector of ``F cos(omega t)``."""
    Fe = np.zeros(2 * sys.H + 1)
    Fe[1] = F
    return Fe


def linear_response(sys, omega, F):
    """Closed-form harmonic vector of the linear oscillator (nonlinearity dropped).

    ``X1c - i X1s = F / (k - m omega^2 + i c omega)``.
    """
    z = F / (sys.k - sys.m * omega**2 + 1j * sys.c * omega)
    X = np.zeros(2 * sys.H + 1)
    X[1], X[2] = z.real, -z.imag
    return X


def hbm_residual(sys, X, omega, F, *, jacobian=True, fast=True):
    """Assemble the harmonic balance residual at ``(X, omega, F)``."""
    X = np.asarray(X, dtype=float)
    if X.shape != (sys.n_dof,):
        raise ValueError(f"X has shape {X.shape}, expected ({sys.n_dof},)")
    E, dE = dynamic_stiffness(sys, omega)
    nl = nonlinear_force(sys.force, X, omega, sys.Nt, jacobian=jacobian, fast=fast)
    R = E @ X + nl.F - external_force(sys, F)
    if not jacobian:
        return HbmResidual(R)
    dR_dF = np.zeros_like(R)
    dR_dF[1] = -1.0
    return HbmResidual(R, E + nl.dF_dX, dE @ X + nl.dF_domega, dR_dF)


def residual_scale(sys):
    """Force unit ``k_lin x_ref`` used to nondimensionalize residual norms."""
    k_lin = sys.k_lin
    return (k_lin if k_lin > 0 else 1.0) * sys.x_ref


def newton_step(J, R):
    """Solve ``J d = -R``, falling back to least squares when ``J`` is singular."""
    try:
        d = np.linalg.solve(J, -R)
        if np.all(np.isfinite(d)):
            return d
    except np.linalg.LinAlgError:
        pass
    return np.linalg.lstsq(J, -R, rcond=None)[0]


def solve_hbm(sys, X_guess, omega, F, tol=1e-9, max_iter=30, *, full_output=False,
              fast=True):
    """Damped Newton solve of the harmonic balance equations at fixed ``omega, F``.

    Parameters
    ----------
    sys : SystemConfig
    X_guess : array_like
        Initial harmonic vector; must be finite.
    omega, F : float
        Excitation frequency and amplitude.
    tol : float
        Convergence threshold on ``max|R| / (k_lin x_ref)``.
    max_iter : int
        Newton iterations allowed; each may halve its step up to 8 times.
    full_output : bool
        Return an :class:`HbmSolution` instead of the bare vector.

    Raises
    ------
    NonConvergence
        With the best iterate if ``tol`` is not met.
    """
    X = np.array(X_guess, dtype=float)
    if X.shape != (sys.n_dof,):
        raise ValueError(f"X_guess has shape {X.shape}, expected ({sys.n_dof},)")
    if not np.all(np.isfinite(X)):
        raise ValueError("X_guess contains non-finite entries")
    scale = residual_scale(sys)

    res = hbm_residual(sys, X, omega, F, fast=fast)
    norm = np.max(np.abs(res.R)) / scale
    best = (norm, X)
    it = 0
    while norm > tol:
        if it == max_iter:
            raise NonConvergence(
                f"HBM did not converge in {max_iter} iterations at omega={omega:g}, "
                f"F={F:g} (residual {best[0]:.3e})", best[1], best[0], it)
        it += 1
        d = newton_step(res.dR_dX, res.R)
        trial = _damped_trial(sys, X, d, omega, F, norm, scale, fast)
        if trial is None:
            raise NonConvergence(f"HBM diverged at omega={omega:g}, F={F:g}",
                                 best[1], best[0], it)
        X, res, norm = trial
        if norm < best[0]:
            best = (norm, X)
    if full_output:
        return HbmSolution(X, norm, it)
    return X


def _damped_trial(sys, X, d, omega, F, norm, scale, fast):
    # Halve the step until the residual drops; when no halving helps, keep the
    # full step, which lets piecewise-linear laws jump between kink regions.
    first = None
    step = 1.0
    for _ in range(9):
        X_try = X + step * d
        try:
            r_try = hbm_residual(sys, X_try, omega, F, fast=fast)
            n_try = np.max(np.abs(r_try.R)) / scale
        except ValueError:
            n_try = np.inf
        if first is None and np.isfinite(n_try):
            first = (X_try, r_try, n_try)
        if n_try < norm:
            return X_try, r_try, n_try
        step *= 0.5
    return first
