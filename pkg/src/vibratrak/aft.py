"""
Alternating frequency-time (AFT) evaluation of nonlinear forces.

Harmonic vectors are ordered ``[X0, X1c, X1s, ..., XHc, XHs]``. A period is
sampled at ``tau_j = 2 pi j / Nt`` (``t_j = tau_j / omega``), so displacement
samples do not depend on ``omega`` while velocities scale with it.

Hysteretic elements are pre-cycled: the element starts from the state reached
by loading it from rest to ``x[0]``, the period is traversed twice, and the
second pass is transformed. Derivatives of hysteretic forces are propagated by
remembering, per slider, the sample at which it last slipped (its anchor);
while stuck, a slider's force is its anchor force plus the displacement
change since the anchor.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from .model import (HystereticState, Iwan, Jenkins, eval_instantaneous, is_hysteretic,
                    iwan_sliders)


class AftError(ValueError):
    """Non-finite data met during an AFT evaluation."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


@dataclass
class AftResult:
    """Harmonic force coefficients with derivatives.

    Attributes
    ----------
    F : (2H+1,) numpy.ndarray
        Force harmonic coefficients.
    dF_dX : (2H+1, 2H+1) numpy.ndarray or None
        Derivative with respect to the displacement harmonics.
    dF_domega : (2H+1,) numpy.ndarray or None
        Derivative with respect to frequency (velocity dependence only).
    element_evaluations : int
        Hysteretic element evaluations performed (0 for pointwise laws).
    critical_path : int or None
        Sequential element evaluations on the fast hysteretic path; the final
        vectorized fill counts as one.
    """

    F: np.ndarray
    dF_dX: Optional[np.ndarray] = None
    dF_domega: Optional[np.ndarray] = None
    element_evaluations: int = 0
    critical_path: Optional[int] = None


def n_harmonics(X):
    n = len(X)
    if n % 2 != 1:
        raise ValueError(f"harmonic vector length {n} is not 2H+1")
    return (n - 1) // 2


@lru_cache(maxsize=64)
def _basis(H, Nt):
    tau = 2 * np.pi * np.arange(Nt) / Nt
    k = np.arange(1, H + 1)
    kt = np.outer(tau, k)
    S = np.empty((Nt, 2 * H + 1))
    D = np.zeros((Nt, 2 * H + 1))
    S[:, 0] = 1.0
    S[:, 1::2] = np.cos(kt)
    S[:, 2::2] = np.sin(kt)
    D[:, 1::2] = -k * np.sin(kt)
    D[:, 2::2] = k * np.cos(kt)
    A = S.T * (2.0 / Nt)
    A[0] = 1.0 / Nt
    for arr in (S, D, A):
        arr.setflags(write=False)
    return S, D, A


def fourier_matrices(H, Nt):
    """Sampling and analysis matrices for ``H`` harmonics and ``Nt`` samples.

    Returns
    -------
    S : (Nt, 2H+1) numpy.ndarray
        ``x = S @ X``.
    D : (Nt, 2H+1) numpy.ndarray
        ``v = omega * D @ X``.
    A : (2H+1, Nt) numpy.ndarray
        ``F = A @ f``; ``A @ S`` is the identity.
    """
    return _basis(H, Nt)


def _check_sampling(H, Nt):
    if Nt < 4 * H:
        raise ValueError(f"Nt={Nt} is below the anti-aliasing floor 4H={4 * H}")


def synthesize_time_series(X, omega, Nt):
    """Displacement and velocity samples over one period.

    Samples lie at ``t_j = j * 2 pi / (omega Nt)``, ``j = 0 .. Nt-1``.
    """
    X = np.asarray(X, dtype=float)
    H = n_harmonics(X)
    _check_sampling(H, Nt)
    Z = np.zeros(Nt // 2 + 1, dtype=complex)
    Z[0] = X[0] * Nt
    Z[1:H + 1] = (X[1::2] - 1j * X[2::2]) * (Nt / 2)
    x = np.fft.irfft(Z, Nt)
    k = np.arange(H + 1)
    v = np.fft.irfft(1j * k * omega * Z[:H + 1], Nt)
    return x, v


def harmonic_coefficients(f, H):
    """Harmonic coefficients ``[F0, F1c, F1s, ...]`` of a periodic sample series.

    ``F0`` is the period mean; higher coefficients use the ``2/Nt`` scaling of
    the cosine and sine Fourier integrals.
    """
    f = np.asarray(f, dtype=float)
    Nt = f.shape[0]
    Z = np.fft.rfft(f)
    F = np.empty(2 * H + 1)
    F[0] = Z[0].real / Nt
    F[1::2] = 2.0 * Z[1:H + 1].real / Nt
    F[2::2] = -2.0 * Z[1:H + 1].imag / Nt
    return F


def _check_finite(arr, what):
    bad = ~np.isfinite(arr)
    if bad.any():
        idx = int(np.flatnonzero(bad)[0])
        raise AftError(f"non-finite {what} at sample {idx}", index=idx)


def aft(force, X, omega, Nt=1024, *, jacobian=True):
    """Harmonic coefficients of the nonlinear force via the standard AFT path.

    Hysteretic laws are evaluated serially over two full periods.
    """
    X = np.asarray(X, dtype=float)
    _check_finite(X, "harmonic coefficient")
    H = n_harmonics(X)
    _check_sampling(H, Nt)
    if force is None:
        n = 2 * H + 1
        return AftResult(np.zeros(n), np.zeros((n, n)) if jacobian else None,
                         np.zeros(n) if jacobian else None)
    S, D, A = _basis(H, Nt)
    x = S @ X
    v = omega * (D @ X)

    if is_hysteretic(force):
        if isinstance(force, Jenkins):
            f, dfX = _jenkins_serial(force, x, H, Nt, jacobian)
        else:
            f, dfX = _iwan_serial(force, x, H, Nt, jacobian)
        _check_finite(f, "force")
        res = AftResult(A @ f, element_evaluations=2 * Nt)
        if jacobian:
            res.dF_dX = A @ dfX
            res.dF_domega = np.zeros(2 * H + 1)
        return res

    f, dfdx, dfdv = eval_instantaneous(force, x, v)
    _check_finite(f, "force")
    res = AftResult(A @ f)
    if jacobian:
        J = dfdx[:, None] * S
        if np.any(dfdv):
            J += (omega * dfdv)[:, None] * D
            res.dF_domega = A @ (dfdv * (D @ X))
        else:
            res.dF_domega = np.zeros(2 * H + 1)
        res.dF_dX = A @ J
    return res


# --------------------------------------------------------------------------
# Serial (reference) hysteretic evaluation
# --------------------------------------------------------------------------

def _jenkins_serial(force, x, H, Nt, jacobian):
    kt, Fs = force.k_t, force.F_s
    init = HystereticState.loaded_to(force, x[0])
    xp, fp = float(x[0]), float(init.f0)
    # anchor: sample index of last slip; live: still on the initial elastic
    # loading, whose derivative is carried by the anchor row itself.
    anchor, live = 0, abs(fp) < Fs
    f_out = np.empty(Nt)
    stuck_out = np.empty(Nt, dtype=bool)
    anchor_out = np.empty(Nt, dtype=np.intp)
    live_out = np.empty(Nt, dtype=bool)
    xs = x.tolist()
    for sweep in range(2):
        for j, xj in enumerate(xs):
            trial = kt * (xj - xp) + fp
            if -Fs < trial < Fs:
                fp = trial
                stuck = True
            else:
                fp = Fs if trial > 0 else -Fs
                anchor, live, stuck = j, False, False
            xp = xj
            if sweep == 1:
                f_out[j] = fp
                stuck_out[j] = stuck
                anchor_out[j] = anchor
                live_out[j] = live
    if not jacobian:
        return f_out, None
    S, _, _ = _basis(H, Nt)
    dead = stuck_out & ~live_out
    dfX = kt * (stuck_out[:, None] * S - dead[:, None] * S[anchor_out])
    return f_out, dfX


def _iwan_serial(force, x, H, Nt, jacobian):
    strength, weight = iwan_sliders(force)
    ns = strength.size
    init = HystereticState.loaded_to(force, x[0])
    xp = float(x[0])
    fp = np.array(init.f0, dtype=float)
    anchor = np.zeros(ns, dtype=np.intp)
    live = np.abs(fp) < strength
    f_out = np.empty(Nt)
    if jacobian:
        stuck_out = np.empty((Nt, ns), dtype=bool)
        anchor_out = np.empty((Nt, ns), dtype=np.intp)
        live_out = np.empty((Nt, ns), dtype=bool)
    for sweep in range(2):
        for j in range(Nt):
            xj = x[j]
            trial = xj - xp + fp
            stuck = np.abs(trial) < strength
            fp = np.where(stuck, trial, np.copysign(strength, trial))
            anchor = np.where(stuck, anchor, j)
            live &= stuck
            xp = xj
            if sweep == 1:
                f_out[j] = weight @ fp
                if jacobian:
                    stuck_out[j] = stuck
                    anchor_out[j] = anchor
                    live_out[j] = live
    if not jacobian:
        return f_out, None
    S, _, _ = _basis(H, Nt)
    ws = stuck_out * weight
    dead = ws * ~live_out
    dfX = ws.sum(axis=1)[:, None] * S - np.einsum("js,jsn->jn", dead, S[anchor_out])
    return f_out, dfX


# --------------------------------------------------------------------------
# Fast hysteretic evaluation
# --------------------------------------------------------------------------

def find_critical_instants(x):
    """Indices where the sign of the forward difference changes (circularly).

    These are the velocity reversals of a sampled periodic displacement. A
    constant series has none.
    """
    x = np.asarray(x, dtype=float)
    d = np.empty_like(x)
    np.subtract(x[1:], x[:-1], out=d[:-1])
    d[-1] = x[0] - x[-1]
    s = np.sign(d)
    if not s.any():
        return np.empty(0, dtype=np.intp)
    change = np.empty(s.shape, dtype=bool)
    change[1:] = s[1:] != s[:-1]
    change[0] = s[0] != s[-1]
    return np.flatnonzero(change)


def aft_fast_hysteretic(force, X, omega, Nt=1024, *, jacobian=True):
    """AFT for Jenkins/Iwan evaluating the element sequentially only at reversals.

    Two passes over the ordered reversal points bring the element to steady
    state; every other sample is then evaluated in one vectorized step from
    the most recent preceding reversal state. The force series equals the
    serial path's up to rounding.
    """
    if not is_hysteretic(force):
        raise TypeError(f"{type(force).__name__} is not a hysteretic force")
    X = np.asarray(X, dtype=float)
    _check_finite(X, "harmonic coefficient")
    H = n_harmonics(X)
    _check_sampling(H, Nt)
    S, _, A = _basis(H, Nt)
    x = S @ X
    crit = find_critical_instants(x)
    if crit.size == 0:
        return aft(force, X, omega, Nt, jacobian=jacobian)

    if isinstance(force, Jenkins):
        f, dF_dX, m = _jenkins_fast(force, x, crit, H, Nt, jacobian)
    else:
        f, dfX, m = _iwan_fast(force, x, crit, H, Nt, jacobian)
        dF_dX = A @ dfX if jacobian else None
    _check_finite(f, "force")

    res = AftResult(A @ f, element_evaluations=2 * m + Nt, critical_path=2 * m + 1)
    if jacobian:
        res.dF_dX = dF_dX
        res.dF_domega = np.zeros(2 * H + 1)
    return res


def _jenkins_fast(force, x, crit, H, Nt, jacobian):
    kt, Fs = force.k_t, force.F_s
    init = HystereticState.loaded_to(force, x[0])
    xp, fp = float(x[0]), float(init.f0)
    anchor, live = 0, abs(fp) < Fs
    # Slot 0 holds the wrap state (end of pass 1) used before crit[0]; slot
    # i holds the pass-2 state at crit[i-1].
    xc = x[crit].tolist()
    n = len(xc) + 1
    xs, fs = np.empty(n), np.empty(n)
    anchors = np.empty(n, dtype=np.intp)
    lives = np.empty(n, dtype=bool)
    for sweep in range(2):
        for i, (c, xj) in enumerate(zip(crit.tolist(), xc)):
            trial = kt * (xj - xp) + fp
            if -Fs < trial < Fs:
                fp = trial
            else:
                fp = Fs if trial > 0 else -Fs
                anchor, live = c, False
            xp = xj
            k = i + 1 if sweep else (0 if i == n - 2 else -1)
            if k >= 0:
                xs[k], fs[k], anchors[k], lives[k] = xp, fp, anchor, live

    bounds = np.concatenate(([0], crit, [Nt]))
    counts = bounds[1:] - bounds[:-1]
    seg = np.repeat(np.arange(n), counts)
    trial = kt * (x - xs[seg]) + fs[seg]
    stuck = np.abs(trial) < Fs
    f = np.where(stuck, trial, np.copysign(Fs, trial))
    if not jacobian:
        return f, None, n - 1
    # Sum the dead rows segment-wise before touching the anchor rows.
    S, _, A = _basis(H, Nt)
    dead = A * (stuck & ~lives[seg])
    keep = counts > 0
    G = np.add.reduceat(dead, bounds[:-1][keep], axis=1)
    dF = kt * ((A * stuck) @ S - G @ S[anchors[keep]])
    return f, dF, n - 1


def _iwan_fast(force, x, crit, H, Nt, jacobian):
    strength, weight = iwan_sliders(force)
    init = HystereticState.loaded_to(force, x[0])
    fphi = np.array(init.f0, dtype=float)
    live = np.abs(fphi) < strength
    anchor = np.zeros(strength.size, dtype=np.intp)
    xp = x[0]
    m = crit.size
    xs = np.empty(m + 1)
    fs = np.empty((m + 1, strength.size))
    anchors = np.empty((m + 1, strength.size), dtype=np.intp)
    lives = np.empty((m + 1, strength.size), dtype=bool)
    for sweep in range(2):
        for i, c in enumerate(crit):
            trial = x[c] - xp + fphi
            stuck = np.abs(trial) < strength
            fphi = np.where(stuck, trial, np.copysign(strength, trial))
            anchor = np.where(stuck, anchor, c)
            live = live & stuck
            xp = x[c]
            k = i + 1 if sweep else (0 if i == m - 1 else -1)
            if k >= 0:
                xs[k], fs[k], anchors[k], lives[k] = xp, fphi, anchor, live

    seg = np.repeat(np.arange(m + 1), np.diff(crit, prepend=0, append=Nt))
    trial = (x - xs[seg])[:, None] + fs[seg]
    stuck = np.abs(trial) < strength
    f = np.where(stuck, trial, np.copysign(strength, trial)) @ weight
    if not jacobian:
        return f, None, m
    S, _, _ = _basis(H, Nt)
    ws = stuck * weight
    dead_w = ws * ~lives[seg]
    dfX = ws.sum(axis=1)[:, None] * S
    # Group samples by segment so each anchor set multiplies S once.
    bounds = np.flatnonzero(np.diff(seg)) + 1
    for lo, hi in zip(np.r_[0, bounds], np.r_[bounds, Nt]):
        dfX[lo:hi] -= dead_w[lo:hi] @ S[anchors[seg[lo]]]
    return f, dfX, m


def nonlinear_force(force, X, omega, Nt=1024, *, jacobian=True, fast=True):
    """Dispatch to the fast hysteretic path where it applies."""
    if fast and is_hysteretic(force):
        return aft_fast_hysteretic(force, X, omega, Nt, jacobian=jacobian)
    return aft(force, X, omega, Nt, jacobian=jacobian)
