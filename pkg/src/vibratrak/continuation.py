"""
Arclength continuation with a tangent predictor and an orthogonal corrector.

A branch is a curve of augmented unknowns ``y = [u, lam]`` satisfying
``R(y) = 0`` with ``R`` of length ``len(y) - 1``. The residual callback returns
``(R, J)`` with ``J`` of shape ``(m, m + 1)``, the parameter column last.
Residuals are expected in nondimensional units so a single tolerance applies.

Distances along the branch are measured in a weighted metric: state
coordinates are divided by ``max(|u|, eps)`` at the current point and the
parameter by ``lam_scale``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .hbm import hbm_residual, linear_response, newton_step, residual_scale


class ContinuationError(RuntimeError):
    """The starting point of a branch could not be converged."""


@dataclass
class ContinuationConfig:
    """Step control and termination settings.

    Parameters
    ----------
    lam_range : (float, float)
        Parameter interval; the branch stops on leaving it.
    ds0, ds_min, ds_max : float
        Initial, smallest and largest arc steps in the weighted metric.
    max_points : int
        Cap on accepted points, including the start.
    tol : float
        Corrector threshold on ``max|R|``.
    max_iter : int
        Corrector iterations per attempt.
    grow, shrink : float
        Step multiplier after an easy step and divisor after a failure.
    fast_iters : int
        A step converged within this many iterations counts as easy.
    lam_scale : float, optional
        Parameter scale in the arclength metric; defaults to the width of
        ``lam_range`` so that ``ds`` measures a fraction of the sweep.
    eps : float
        Floor on the state norm used in the metric.
    max_turn : float
        Largest angle (radians) between successive tangents before the step
        is rejected as a possible branch jump.
    """

    lam_range: tuple = (0.0, 1.0)
    ds0: float = 0.01
    ds_min: float = 1e-6
    ds_max: float = 0.05
    max_points: int = 5000
    tol: float = 1e-9
    max_iter: int = 12
    grow: float = 2.0
    shrink: float = 4.0
    fast_iters: int = 3
    lam_scale: Optional[float] = None
    eps: float = 1e-3
    max_turn: float = 0.6

    def __post_init__(self):
        lo, hi = self.lam_range
        if hi < lo:
            raise ValueError("lam_range must be ordered (low, high)")
        if not 0 < self.ds_min <= self.ds0 <= self.ds_max:
            raise ValueError("require 0 < ds_min <= ds0 <= ds_max")
        if self.max_points < 1:
            raise ValueError("max_points must be at least 1")
        if self.lam_scale is not None and not self.lam_scale > 0:
            raise ValueError("lam_scale must be positive")

    @property
    def parameter_scale(self):
        """Resolved ``lam_scale``: the range width unless set explicitly."""
        if self.lam_scale is not None:
            return self.lam_scale
        width = self.lam_range[1] - self.lam_range[0]
        return width if width > 0 else 1.0

    def scaled(self, factor):
        """Copy with ``ds0`` and ``ds_max`` multiplied by ``factor``."""
        return ContinuationConfig(**{
            **self.__dict__,
            "ds0": self.ds0 * factor,
            "ds_max": self.ds_max * factor,
            "ds_min": min(self.ds_min, self.ds0 * factor)})


@dataclass
class BranchPoint:
    """Converged point on a branch."""

    y: np.ndarray
    residual_norm: float
    arc: float = 0.0
    tangent: Optional[np.ndarray] = None
    iterations: int = 0

    @property
    def lam(self):
        return float(self.y[-1])

    @property
    def u(self):
        return self.y[:-1]


class Branch(list):
    """Ordered :class:`BranchPoint` list with run diagnostics.

    Attributes
    ----------
    status : str
        ``"complete"`` (left the parameter range), ``"max_points"`` or
        ``"stalled"`` (step fell below ``ds_min``).
    message : str
        Human readable termination reason.
    newton_iterations : int
        Newton iterations spent on the start point and all corrector
        attempts, rejected steps included.
    """

    def __init__(self, points=()):
        super().__init__(points)
        self.status = "complete"
        self.message = ""
        self.newton_iterations = 0

    @property
    def lam(self):
        return np.array([p.lam for p in self])

    @property
    def u(self):
        return np.array([p.u for p in self])

    @property
    def arc(self):
        return np.array([p.arc for p in self])


def _weights(y, cfg):
    w = np.full(y.size, 1.0 / max(np.linalg.norm(y[:-1]), cfg.eps))
    w[-1] = 1.0 / cfg.parameter_scale
    return w


def _tangent(J, w, prev=None):
    # Null vector of J in the weighted coordinates z = w * y, fixed in sign by
    # ``prev`` or, initially, by increasing lam.
    Js = J / w
    m = Js.shape[0]
    A = np.empty((m + 1, m + 1))
    A[:m] = Js
    if prev is None:
        A[m] = 0.0
        A[m, -1] = 1.0
    else:
        A[m] = prev
    rhs = np.zeros(m + 1)
    rhs[m] = 1.0
    t = newton_step(A, -rhs)
    t /= np.linalg.norm(t)
    if prev is not None and t @ prev < 0:
        t = -t
    elif prev is None and t[-1] < 0:
        t = -t
    return t


def _correct(residual_fn, y, row, target, cfg):
    """Newton on ``R(y) = 0`` plus the linear constraint ``row @ y = target``.

    Returns ``(y, R, J, iterations)``; ``y`` is None on failure.
    """
    it = 0
    while True:
        try:
            R, J = residual_fn(y)
        except (ValueError, ArithmeticError):
            return None, None, None, it
        norm = np.max(np.abs(R)) if R.size else 0.0
        c = row @ y - target
        if not np.isfinite(norm):
            return None, None, None, it
        if norm <= cfg.tol and abs(c) <= max(cfg.tol, 1e-12 * abs(target)) * 10:
            return y, R, J, it
        if it == cfg.max_iter:
            return None, None, None, it
        it += 1
        A = np.vstack([J, row])
        y = y + newton_step(A, np.r_[R, c])


def initial_point(residual_fn, lam0, u_seed, cfg=None):
    """Converge the state at fixed parameter ``lam0`` from ``u_seed``.

    Raises
    ------
    ValueError
        If ``lam0`` lies outside ``cfg.lam_range``.
    ContinuationError
        If Newton fails; try a different ``lam0`` or seed.
    """
    cfg = cfg or ContinuationConfig(lam_range=(lam0, lam0))
    lo, hi = cfg.lam_range
    if not lo <= lam0 <= hi:
        raise ValueError(f"lam0={lam0} lies outside the range [{lo}, {hi}]")
    y = np.r_[np.asarray(u_seed, dtype=float), lam0]
    if not np.all(np.isfinite(y)):
        raise ValueError("seed contains non-finite entries")
    R, J = residual_fn(y)
    norm = np.max(np.abs(R))
    it = 0
    # Damped Newton at fixed parameter: halve until the residual drops, else
    # take the full step.
    while norm > cfg.tol:
        if it == max(cfg.max_iter, 40):
            raise ContinuationError(
                f"no converged starting point at parameter {lam0:g} (residual "
                f"{norm:.3e}); try another start value or seed")
        it += 1
        d = newton_step(J[:, :-1], R)
        first, step = None, 1.0
        for _ in range(9):
            y_try = y.copy()
            y_try[:-1] += step * d
            try:
                R_try, J_try = residual_fn(y_try)
                n_try = np.max(np.abs(R_try))
            except (ValueError, ArithmeticError):
                n_try = np.inf
            if first is None and np.isfinite(n_try):
                first = (y_try, R_try, J_try, n_try)
            if n_try < norm:
                first = (y_try, R_try, J_try, n_try)
                break
            step *= 0.5
        if first is None:
            raise ContinuationError(f"Newton diverged from the seed at parameter {lam0:g}")
        y, R, J, norm = first
    return BranchPoint(y, float(norm), iterations=it)


def continue_branch(residual_fn: Callable, y_start, cfg: ContinuationConfig):
    """Trace a branch from a converged start point.

    Parameters
    ----------
    residual_fn : callable
        ``y -> (R, J)``.
    y_start : array_like or BranchPoint
        Converged start; its parameter must lie in ``cfg.lam_range``.
    cfg : ContinuationConfig

    Returns
    -------
    Branch
    """
    seed_iterations = 0
    if isinstance(y_start, BranchPoint):
        y_start, seed_iterations = y_start.y, y_start.iterations
    y = np.array(y_start, dtype=float)
    R, J = residual_fn(y)
    norm = float(np.max(np.abs(R)))
    if norm > cfg.tol:
        raise ContinuationError(
            f"start point is not converged (residual {norm:.3e} > tol {cfg.tol:.1e})")
    lo, hi = cfg.lam_range
    branch = Branch()
    branch.newton_iterations = seed_iterations
    w = _weights(y, cfg)
    t = _tangent(J, w)
    branch.append(BranchPoint(y, norm, 0.0, t / w))
    if hi == lo:
        branch.message = "zero-length parameter range"
        return branch

    ds = cfg.ds0
    arc = 0.0
    while True:
        if len(branch) >= cfg.max_points:
            branch.status, branch.message = "max_points", f"reached {cfg.max_points} points"
            return branch
        if ds < cfg.ds_min:
            branch.status = "stalled"
            branch.message = (f"step fell below ds_min={cfg.ds_min:g} at parameter "
                              f"{y[-1]:.6g}")
            return branch

        z_pred = w * y + ds * t
        y_pred = z_pred / w
        row = t * w
        y_new, R, J, it = _correct(residual_fn, y_pred, row, row @ y_pred, cfg)
        branch.newton_iterations += it
        if y_new is not None:
            w_new = _weights(y_new, cfg)
            prev = w_new * (t / w)
            prev /= np.linalg.norm(prev)
            t_new = _tangent(J, w_new, prev=prev)
            turn = np.arccos(np.clip(t_new @ prev, -1.0, 1.0))
            if turn > cfg.max_turn and ds > cfg.ds_min * cfg.shrink:
                y_new = None
        if y_new is None:
            ds /= cfg.shrink
            continue

        lam = y_new[-1]
        if lam > hi or lam < lo:
            end = _endpoint(residual_fn, y, y_new, hi if lam > hi else lo, cfg, branch)
            if end is not None:
                d = np.linalg.norm(w * (end.y - y))
                if d < cfg.ds_min / 2 and len(branch) > 1:
                    branch.pop()
                    d = np.linalg.norm(_weights(branch[-1].y, cfg) * (end.y - branch[-1].y))
                    arc = branch[-1].arc
                end.arc = arc + d
                branch.append(end)
            branch.status = "complete"
            branch.message = f"left parameter range at {lam:.6g}"
            return branch

        arc += np.linalg.norm(w * (y_new - y))
        y, t, w = y_new, t_new, w_new
        branch.append(BranchPoint(y, float(np.max(np.abs(R))), arc, t / w, it))
        if it <= cfg.fast_iters:
            ds = min(ds * cfg.grow, cfg.ds_max)


def _endpoint(residual_fn, y0, y1, lam_b, cfg, branch):
    # Secant guess between the last accepted point and the overshoot, then
    # Newton with the parameter pinned to the boundary.
    s = (lam_b - y0[-1]) / (y1[-1] - y0[-1])
    guess = y0 + s * (y1 - y0)
    row = np.zeros(y0.size)
    row[-1] = 1.0
    y, R, J, it = _correct(residual_fn, guess, row, lam_b, cfg)
    branch.newton_iterations += it
    if y is None:
        return None
    y[-1] = lam_b
    w = _weights(y, cfg)
    return BranchPoint(y, float(np.max(np.abs(R))), 0.0, _tangent(J, w) / w, it)


# --------------------------------------------------------------------------
# Frequency response curves
# --------------------------------------------------------------------------

def frc_residual(sys, F, *, fast=True):
    """Nondimensional HBM residual ``y = [X/x_ref, omega/omega0] -> (R, J)``."""
    x_ref = sys.x_ref
    omega0 = np.sqrt(sys.k_lin / sys.m) if sys.k_lin > 0 else 1.0
    scale = residual_scale(sys)

    def fn(y):
        X = y[:-1] * x_ref
        omega = y[-1] * omega0
        r = hbm_residual(sys, X, omega, F, fast=fast)
        J = np.empty((X.size, X.size + 1))
        J[:, :-1] = r.dR_dX * (x_ref / scale)
        J[:, -1] = r.dR_domega * (omega0 / scale)
        return r.R / scale, J

    return fn, x_ref, omega0


def compute_frc(sys, F, omega_range, cfg=None, X_seed=None, *, fast=True,
                start_margin=0.2):
    """Trace the FRC at force ``F`` across ``omega_range`` (dimensional).

    The branch is parameterized by ``omega / omega0`` and its states are
    ``X / x_ref``; use :func:`frc_arrays` for dimensional values. The start
    is seeded from the linear response at ``omega_range[0]`` unless
    ``X_seed`` is given.

    A fold close to the start can send the branch back below
    ``omega_range[0]``; it may run down to ``(1 - start_margin)`` times that
    frequency before it is considered to have left the range, so loops near
    the start are traced instead of truncated.
    """
    fn, x_ref, omega0 = frc_residual(sys, F, fast=fast)
    lo, hi = omega_range[0] / omega0, omega_range[1] / omega0
    if not 0 <= start_margin < 1:
        raise ValueError("start_margin must lie in [0, 1)")
    rng = (lo * (1 - start_margin), hi)
    cfg = cfg or ContinuationConfig()
    scale = cfg.lam_scale if cfg.lam_scale is not None else (hi - lo if hi > lo else 1.0)
    cfg = ContinuationConfig(**{**cfg.__dict__, "lam_range": rng, "lam_scale": scale})
    if X_seed is None:
        X_seed = linear_response(sys, omega_range[0], F)
        extra = 0
        try:
            start = initial_point(fn, lo, np.asarray(X_seed) / x_ref, cfg)
        except ContinuationError:
            X_seed, extra = _seed_by_force(sys, F, omega_range[0], cfg, fast)
            start = initial_point(fn, lo, np.asarray(X_seed) / x_ref, cfg)
        start.iterations += extra
    else:
        start = initial_point(fn, lo, np.asarray(X_seed) / x_ref, cfg)
    return continue_branch(fn, start, cfg)


def _seed_by_force(sys, F, omega, cfg, fast, start_fraction=1e-3):
    # Trace the fixed-frequency response from a nearly linear force level up
    # to F; arclength steps pass any folds in force.
    x_ref = sys.x_ref
    scale = residual_scale(sys)

    def fn(y):
        X = y[:-1] * x_ref
        r = hbm_residual(sys, X, omega, y[-1] * F, fast=fast)
        J = np.empty((X.size, X.size + 1))
        J[:, :-1] = r.dR_dX * (x_ref / scale)
        J[:, -1] = r.dR_dF * (F / scale)
        return r.R / scale, J

    sub = ContinuationConfig(**{**cfg.__dict__, "lam_range": (start_fraction, 1.0),
                                "lam_scale": 1.0, "ds0": 0.01})
    X0 = linear_response(sys, omega, start_fraction * F) / x_ref
    start = initial_point(fn, start_fraction, X0, sub)
    branch = continue_branch(fn, start, sub)
    if branch.status != "complete":
        raise ContinuationError(f"force homotopy stopped early: {branch.message}")
    return branch[-1].u * x_ref, branch.newton_iterations


def frc_arrays(sys, branch):
    """Dimensional ``(omega, X)`` arrays of an FRC branch."""
    omega0 = np.sqrt(sys.k_lin / sys.m) if sys.k_lin > 0 else 1.0
    return branch.lam * omega0, branch.u * sys.x_ref
