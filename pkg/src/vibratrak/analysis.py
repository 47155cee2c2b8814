"""
A-priori excitation estimates and post-processing of FRCs and backbones.

Closed-form broadband excitations serve as oracles for the numerical
decomposition. FRC post-processing extracts superharmonic peaks, envelopes
and the area-based agreement metric between a tracked backbone and peak
tracking on FRCs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .aft import fourier_matrices, n_harmonics
from .continuation import compute_frc, frc_arrays
from .hbm import NonConvergence, solve_hbm
from .model import FORCE_KINDS, Iwan, Jenkins, SofteningII, SystemConfig, linearized_stiffness
from .vprnm import broadband_force, expected_phase, harmonic_phase, vprnm_backbone

__all__ = [
    "AprioriSample", "apriori_sweep", "analytic_fbroad", "PeakRecord", "FrcCurve",
    "frc_curve", "extract_superharmonic_peaks", "total_amplitude", "harmonic_phase",
    "Envelope", "frc_envelope", "ForceEnvelope", "force_envelope", "accuracy_metric",
    "CompareResult", "compare_superharmonic", "select_peak", "backbone_amplitudes",
    "AnalysisError",
]


class AnalysisError(ValueError):
    """Unsupported closed form or incompatible post-processing inputs."""


# --------------------------------------------------------------------------
# A-priori excitation
# --------------------------------------------------------------------------

@dataclass
class AprioriSample:
    """Broadband excitation for an assumed motion.

    ``magnitude_normalized`` divides by ``F_s`` for saturating laws and by
    ``k_lin x_ref`` otherwise; ``X1_normalized`` is ``X1 / x_ref``.
    """

    X1: float
    X3: float
    n: int
    Fc: float
    Fs: float
    magnitude: float
    phi_broad: float
    phi_n: float
    X1_normalized: float
    magnitude_normalized: float


def _probe_system(force, H, Nt):
    return SystemConfig(m=1.0, c=0.0, k=0.0, force=force, H=H, Nt=Nt)


def _locked_third(sys, X1, X3, omega):
    # X3 cos(3 w t - phi_broad,3), phi_broad,3 from the fundamental alone.
    X = np.zeros(sys.n_dof)
    X[1] = X1
    b3 = broadband_force(sys, X, omega, 3)
    if b3.magnitude == 0:
        return X
    phi = b3.phase
    X[5], X[6] = X3 * math.cos(phi), X3 * math.sin(phi)
    return X


def apriori_sweep(force, n, amplitudes, omega=1.0, X3=None, *, x_ref=1.0, k_lin=None,
                  Nt=1024):
    """Broadband excitation of harmonic ``n`` over a grid of fundamental amplitudes.

    Parameters
    ----------
    force : ForceModel
    n : int
        Excited harmonic, ``n >= 2``.
    amplitudes : array_like
        Fundamental amplitudes ``X1 > 0``.
    omega : float
        Frequency (matters for cubic damping only).
    X3 : float or array_like, optional
        Third harmonic amplitude locked in phase with its own broadband
        excitation; requires ``n >= 4``.
    x_ref, k_lin : float
        Normalization constants; ``k_lin`` defaults to the slope of ``force``
        at the origin (1 if that is zero).

    Returns
    -------
    list of AprioriSample
    """
    amps = np.atleast_1d(np.asarray(amplitudes, dtype=float))
    if np.any(amps <= 0):
        raise AnalysisError("amplitudes must be positive")
    if X3 is not None and n < 4:
        raise AnalysisError("a locked third harmonic needs n >= 4")
    X3s = np.zeros_like(amps) if X3 is None else np.broadcast_to(
        np.asarray(X3, dtype=float), amps.shape)
    sys = _probe_system(force, max(n, 3), Nt)
    if k_lin is None:
        k_lin = linearized_stiffness(force) or 1.0
    sat = isinstance(force, (SofteningII, Jenkins, Iwan))
    norm = force.F_s if sat else k_lin * x_ref
    out = []
    for X1, x3 in zip(amps, X3s):
        X = _locked_third(sys, X1, x3, omega) if x3 else _fundamental(sys, X1)
        b = broadband_force(sys, X, omega, n)
        phi_n = expected_phase(b) if b.magnitude > 0 else float("nan")
        out.append(AprioriSample(
            X1=float(X1), X3=float(x3), n=n, Fc=b.Fc, Fs=b.Fs, magnitude=b.magnitude,
            phi_broad=b.phase, phi_n=phi_n, X1_normalized=float(X1 / x_ref),
            magnitude_normalized=b.magnitude / norm))
    return out


def _fundamental(sys, X1):
    X = np.zeros(sys.n_dof)
    X[1] = X1
    return X


def analytic_fbroad(kind, params, X1, X3=None, omega=1.0, n=None):
    """Closed-form broadband excitation ``(Fc, Fs)``.

    With ``X3`` omitted the motion is ``X1 cos(w t)``. With ``X3`` the motion
    adds ``X3 cos(3 w t - phi_broad,3)`` and ``n`` defaults to 5.

    Parameters
    ----------
    kind : str
        One of ``stiffening_duffing``, ``softening_duffing``, ``quintic``,
        ``unilateral_spring`` or ``cubic_damping``.
    params : dict
        Force parameters by name (``alpha``, ``eta``, ``k_nl``, ``gamma``).
    """
    if kind not in FORCE_KINDS:
        raise AnalysisError(f"unknown force kind {kind!r}")
    if kind in ("softening_ii", "jenkins", "iwan"):
        raise AnalysisError(f"{kind} has no closed-form broadband excitation")
    secondary = X3 is not None
    if n is None:
        n = 5 if secondary else (2 if kind == "unilateral_spring" else 3)
    X1 = float(X1)

    if n % 2 == 0 and kind in ("stiffening_duffing", "softening_duffing", "quintic",
                               "cubic_damping"):
        # Odd laws under odd-harmonic motion excite no even harmonics.
        return 0.0, 0.0
    if kind in ("stiffening_duffing", "softening_duffing"):
        a = params["alpha"]
        if not secondary and n == 3:
            return -a * X1**3 / 4, 0.0
        if secondary and n == 5:
            if kind == "stiffening_duffing":
                return 3 * a * (X1**2 * X3 - X1 * X3**2) / 4, 0.0
            return -3 * a * (X1 * X3**2 + X1**2 * X3) / 4, 0.0
    elif kind == "quintic":
        e = params["eta"]
        if not secondary and n == 3:
            return -5 * e * X1**5 / 16, 0.0
        if n == 5:
            X3 = 0.0 if X3 is None else X3
            return (-e * (X1**5 - 20 * X1**4 * X3 + 30 * X1**3 * X3**2
                          - 30 * X1**2 * X3**3 + 20 * X1 * X3**4) / 16, 0.0)
    elif kind == "unilateral_spring":
        if secondary:
            raise AnalysisError("the unilateral spring form assumes fundamental motion")
        k_nl = params["k_nl"]
        if n % 2:
            return 0.0, 0.0
        # Even cosine coefficients of a half-wave rectified cosine.
        sign = -1.0 if (n // 2) % 2 else 1.0
        return sign * 2 * k_nl * X1 / (math.pi * (n * n - 1)), 0.0
    elif kind == "cubic_damping":
        g = params["gamma"]
        w3 = omega**3
        if not secondary and n == 3:
            return 0.0, -g * w3 * X1**3 / 4
        if secondary and n == 5:
            return -9 * g * w3 * X1**2 * X3 / 4, -27 * g * w3 * X1 * X3**2 / 4
    raise AnalysisError(f"no closed form for {kind} at harmonic {n}"
                        + (" with a locked third harmonic" if secondary else ""))


# --------------------------------------------------------------------------
# Amplitudes and phases
# --------------------------------------------------------------------------

def total_amplitude(X, Nt=1024):
    """Largest ``|x(t)|`` over a cycle.

    The largest sample is refined by a quadratic fit through its neighbours
    and then polished with Newton steps on ``x'(tau) = 0``.
    """
    X = np.asarray(X, dtype=float)
    H = n_harmonics(X)
    Nt = max(Nt, 4 * H)
    S, D, _ = fourier_matrices(H, Nt)
    x = S @ X
    j = int(np.argmax(np.abs(x)))
    sgn = 1.0 if x[j] >= 0 else -1.0
    if not np.any(X[1:]):
        return abs(float(X[0]))
    dt = 2 * np.pi / Nt
    y0, y1, y2 = sgn * x[j - 1], sgn * x[j], sgn * x[(j + 1) % Nt]
    den = y0 - 2 * y1 + y2
    tau = j * dt + (0.5 * (y0 - y2) / den * dt if den < 0 else 0.0)
    k = np.arange(1, H + 1)
    c, s = X[1::2], X[2::2]
    for _ in range(4):
        ck, sk = np.cos(k * tau), np.sin(k * tau)
        d1 = np.sum(k * (-c * sk + s * ck))
        d2 = np.sum(k * k * (-c * ck - s * sk))
        if d2 == 0:
            break
        step = d1 / d2
        if abs(step) > dt:
            break
        tau -= step
    val = X[0] + np.sum(c * np.cos(k * tau) + s * np.sin(k * tau))
    return float(max(abs(val), np.max(np.abs(x))))


# --------------------------------------------------------------------------
# FRC post-processing
# --------------------------------------------------------------------------

@dataclass
class FrcCurve:
    """Dimensional FRC: frequency, harmonic vectors and total amplitude."""

    F: float
    omega: np.ndarray
    X: np.ndarray
    amplitude: np.ndarray
    arc: Optional[np.ndarray] = None
    residual_norm: Optional[np.ndarray] = None
    newton_iterations: int = 0
    status: str = "complete"


def frc_curve(sys, F, branch):
    """Wrap an FRC branch from :func:`compute_frc`."""
    omega, X = frc_arrays(sys, branch)
    amp = np.array([total_amplitude(x, sys.Nt) for x in X])
    return FrcCurve(F=F, omega=omega, X=X, amplitude=amp, arc=branch.arc,
                    residual_norm=np.array([p.residual_norm for p in branch]),
                    newton_iterations=branch.newton_iterations, status=branch.status)


@dataclass
class PeakRecord:
    """Superharmonic peak on one FRC.

    ``X_super`` is the total amplitude at the peak of ``|X_n|``; ``X_nom`` is
    the total amplitude of the solution at ``1.1 omega_peak``.
    """

    F: float
    omega_peak: float
    X_super: float
    X_nom: float
    phi_n: float
    amp_n: float
    X: np.ndarray
    omega_nom: float
    X_at_nom: Optional[np.ndarray] = None


def _amp_n(X, n):
    return np.hypot(X[..., 2 * n - 1], X[..., 2 * n])


def extract_superharmonic_peaks(sys, frc, n, *, nominal_factor=1.1, tol=1e-9):
    """Local maxima of ``|X_n|`` along an FRC.

    Each maximum is located by a quadratic in arc length through the three
    branch points around it, re-converged by HBM at the interpolated
    frequency, and paired with an HBM solution at ``nominal_factor`` times
    that frequency.

    Returns
    -------
    list of PeakRecord
        Empty when ``|X_n|`` has no strict interior maximum.
    """
    if not 1 <= n <= sys.H:
        raise AnalysisError(f"harmonic {n} is outside 1..H={sys.H}")
    X, omega = frc.X, frc.omega
    if len(omega) < 3:
        return []
    arc = frc.arc if frc.arc is not None else np.r_[0, np.cumsum(np.abs(np.diff(omega)))]
    a = _amp_n(X, n)
    scale = np.max(np.abs(X)) if X.size else 0.0
    peaks = []
    for i in range(1, len(a) - 1):
        if not (a[i] > a[i - 1] and a[i] > a[i + 1]):
            continue
        if a[i] <= 1e-12 * max(scale, 1e-300):
            continue
        s = arc[i - 1:i + 2]
        p = np.polyfit(s - s[1], a[i - 1:i + 2], 2)
        s_star = -p[1] / (2 * p[0]) if p[0] < 0 else 0.0
        s_star = float(np.clip(s_star, s[0] - s[1], s[2] - s[1]))
        # Interpolate the state on the arc-length quadratic as well.
        L = _lagrange(s - s[1], s_star)
        Xg = L @ X[i - 1:i + 2]
        wg = float(L @ omega[i - 1:i + 2])
        try:
            Xp = solve_hbm(sys, Xg, wg, frc.F, tol=tol)
        except NonConvergence:
            Xp = X[i]
            wg = float(omega[i])
        wn = nominal_factor * wg
        Xnom = _solve_near(sys, frc, wn, tol)
        peaks.append(PeakRecord(
            F=frc.F, omega_peak=wg, X_super=total_amplitude(Xp, sys.Nt),
            X_nom=total_amplitude(Xnom, sys.Nt) if Xnom is not None else float("nan"),
            phi_n=harmonic_phase(Xp, n) if _amp_n(Xp, n) > 0 else float("nan"),
            amp_n=float(_amp_n(Xp, n)), X=Xp, omega_nom=wn, X_at_nom=Xnom))
    return peaks


def _lagrange(nodes, s):
    w = np.ones(3)
    for j in range(3):
        for m in range(3):
            if m != j:
                w[j] *= (s - nodes[m]) / (nodes[j] - nodes[m])
    return w


def _solve_near(sys, frc, omega, tol):
    # Seed from branch points in order of frequency distance.
    order = np.argsort(np.abs(frc.omega - omega))
    for idx in order[:4]:
        try:
            return solve_hbm(sys, frc.X[idx], omega, frc.F, tol=tol)
        except (NonConvergence, ValueError):
            continue
    return None


def select_peak(peaks, omega_hint=None):
    """Pick the dominant peak: largest ``|X_n|``, or nearest to ``omega_hint``."""
    if not peaks:
        return None
    if omega_hint is None:
        return max(peaks, key=lambda p: p.amp_n)
    return min(peaks, key=lambda p: abs(p.omega_peak - omega_hint))


# --------------------------------------------------------------------------
# Envelopes
# --------------------------------------------------------------------------

@dataclass
class Envelope:
    """Per-frequency band of total amplitude over several FRCs."""

    omega: np.ndarray
    lower: np.ndarray
    upper: np.ndarray


def _crossings(omega, amp, grid):
    # All branch values at each grid frequency (FRCs may fold back).
    vals = [[] for _ in grid]
    for k in range(len(omega) - 1):
        w0, w1 = omega[k], omega[k + 1]
        lo, hi = min(w0, w1), max(w0, w1)
        i0 = np.searchsorted(grid, lo, side="left")
        i1 = np.searchsorted(grid, hi, side="right")
        for g in range(i0, i1):
            s = 0.0 if w1 == w0 else (grid[g] - w0) / (w1 - w0)
            vals[g].append(amp[k] + s * (amp[k + 1] - amp[k]))
    return vals


def frc_envelope(frcs: Sequence[FrcCurve], normalized=False, n_grid=400):
    """Band of total amplitude over a common log-spaced frequency grid.

    Parameters
    ----------
    frcs : sequence of FrcCurve
        At least two curves with overlapping frequency support.
    normalized : bool
        Divide amplitudes by the force level.
    """
    if len(frcs) < 2:
        raise AnalysisError("an envelope needs at least two FRCs")
    lo = max(np.min(c.omega) for c in frcs)
    hi = min(np.max(c.omega) for c in frcs)
    if not lo < hi:
        raise AnalysisError("FRC frequency supports do not overlap")
    grid = np.geomspace(lo, hi, n_grid)
    lower = np.full(n_grid, np.inf)
    upper = np.full(n_grid, -np.inf)
    for c in frcs:
        amp = c.amplitude / c.F if normalized else c.amplitude
        for g, v in enumerate(_crossings(c.omega, amp, grid)):
            if v:
                lower[g] = min(lower[g], min(v))
                upper[g] = max(upper[g], max(v))
    return Envelope(grid, lower, upper)


@dataclass
class ForceEnvelope:
    """Per-force band of total amplitude inside each FRC's frequency window."""

    F: np.ndarray
    lower: np.ndarray
    upper: np.ndarray


def force_envelope(frcs: Sequence[FrcCurve], windows, normalized=False):
    """Min and max total amplitude of each FRC within ``windows[i] = (lo, hi)``.

    Window edges are included by interpolation so the band does not depend on
    where branch points happen to fall.
    """
    F, lo_, hi_ = [], [], []
    for c, (wlo, whi) in zip(frcs, windows):
        amp = c.amplitude / c.F if normalized else c.amplitude
        inside = (c.omega >= wlo) & (c.omega <= whi)
        vals = list(amp[inside])
        for edge in _crossings(c.omega, amp, np.array([wlo, whi])):
            vals.extend(edge)
        if not vals:
            continue
        F.append(c.F)
        lo_.append(min(vals))
        hi_.append(max(vals))
    order = np.argsort(F)
    return ForceEnvelope(np.asarray(F)[order], np.asarray(lo_)[order],
                         np.asarray(hi_)[order])


def accuracy_metric(tracked, reference, envelope, *, log_force=True):
    """Percent area between two amplitude-vs-force curves relative to a band.

    Parameters
    ----------
    tracked, reference : (F, amplitude) pairs of arrays
        Backbone totals and peak totals (same normalization as the band).
    envelope : ForceEnvelope
        Band whose area is the denominator.
    log_force : bool
        Integrate over ``log F`` instead of ``F``.

    All curves are treated as piecewise linear in the plotted coordinates and
    integrated by the trapezoid rule on the union of their abscissae.
    """
    tF, ta = (np.asarray(v, dtype=float) for v in tracked)
    rF, ra = (np.asarray(v, dtype=float) for v in reference)
    eF, elo, ehi = envelope.F, envelope.lower, envelope.upper
    f = np.log if log_force else (lambda v: v)
    lo = max(tF.min(), rF.min(), eF.min())
    hi = min(tF.max(), rF.max(), eF.max())
    if not lo < hi:
        raise AnalysisError("force ranges do not overlap")
    grid = np.unique(np.concatenate([tF, rF, eF]))
    grid = grid[(grid >= lo) & (grid <= hi)]
    u = f(grid)
    interp = lambda F_, a_: np.interp(u, *_sorted(f(F_), a_))
    band = interp(eF, ehi) - interp(eF, elo)
    denom = np.trapezoid(band, u)
    if not denom > 0:
        raise AnalysisError("envelope has zero area")
    num = _abs_trapz(interp(tF, ta) - interp(rF, ra), u)
    return 100.0 * num / denom


def _sorted(x, y):
    o = np.argsort(x)
    return x[o], np.asarray(y)[o]


def _abs_trapz(d, u):
    # Exact integral of |d| for piecewise-linear d.
    total = 0.0
    for k in range(len(u) - 1):
        a, b, h = d[k], d[k + 1], u[k + 1] - u[k]
        if a * b >= 0:
            total += 0.5 * h * (abs(a) + abs(b))
        else:
            total += 0.5 * h * (a * a + b * b) / (abs(a) + abs(b))
    return total


# --------------------------------------------------------------------------
# Backbone versus FRC peak comparison
# --------------------------------------------------------------------------

@dataclass
class CompareResult:
    """Outcome of tracking a superharmonic both ways."""

    n: int
    forces: np.ndarray
    frcs: list
    peaks: list
    backbone: object
    envelope: ForceEnvelope
    accuracy: float
    log_force: bool
    normalized: bool
    hbm_newton_iterations: int
    vprnm_newton_iterations: int
    failures: list = field(default_factory=list)


def compare_superharmonic(sys, n, forces, omega_range, F_range=None, *, cfg_frc=None,
                          cfg_vprnm=None, log_force=True, normalized=False,
                          window_factor=1.1, omega_window=(0.75, 1.35),
                          peak_selector: Optional[Callable] = None, mapper=map):
    """Track the ``n``:1 resonance by FRC peak picking and by the backbone.

    Parameters
    ----------
    sys : SystemConfig
    n : int
    forces : sequence of float
        Dimensional force levels for the FRC grid.
    omega_range : (float, float)
        Dimensional frequency range of each FRC.
    F_range : (float, float), optional
        Backbone range; defaults to the extent of ``forces``.
    log_force, normalized : bool
        Metric axis scaling and division of amplitudes by force.
    window_factor : float
        FRC window ``[omega_peak / f, f omega_peak]`` used for the band.
    peak_selector : callable, optional
        ``peaks -> PeakRecord``; by default the peak nearest in frequency to
        the backbone at the same force.
    mapper : callable
        ``map``-like function used over force levels (e.g. an executor's).

    Returns
    -------
    CompareResult
    """
    forces = np.sort(np.asarray(forces, dtype=float))
    if forces.size == 0:
        raise AnalysisError("empty force list")
    F_range = F_range or (forces[0], forces[-1])
    backbone = vprnm_backbone(sys, n, F_range, cfg_vprnm, log_force=log_force,
                              omega_window=omega_window)
    bb_F, bb_w = backbone.F, backbone.omega

    def level(F):
        try:
            br = compute_frc(sys, F, omega_range, cfg_frc)
        except Exception as exc:  # recorded per level; other levels go on
            return F, None, [], str(exc)
        curve = frc_curve(sys, F, br)
        return F, curve, extract_superharmonic_peaks(sys, curve, n), None

    frcs, peaks, failures = [], [], []
    hbm_it = 0
    for F, curve, found, err in mapper(level, forces):
        if err is not None:
            failures.append((float(F), err))
            continue
        frcs.append(curve)
        hbm_it += curve.newton_iterations
        hint = float(np.interp(F, bb_F, bb_w))
        pk = peak_selector(found) if peak_selector else select_peak(found, hint)
        if pk is None:
            failures.append((float(F), "no superharmonic peak"))
            continue
        peaks.append(pk)
    if len(peaks) < 2:
        raise AnalysisError("fewer than two force levels produced a superharmonic peak")

    by_F = {c.F: c for c in frcs}
    kept = [by_F[p.F] for p in peaks]
    windows = [(p.omega_peak / window_factor, p.omega_peak * window_factor) for p in peaks]
    env = force_envelope(kept, windows, normalized=normalized)
    norm = (lambda F_, a_: a_ / F_) if normalized else (lambda F_, a_: a_)
    bb_amp = backbone_amplitudes(sys, backbone)
    pF = np.array([p.F for p in peaks])
    pA = np.array([p.X_super for p in peaks])
    acc = accuracy_metric((bb_F, norm(bb_F, bb_amp)), (pF, norm(pF, pA)), env,
                          log_force=log_force)
    return CompareResult(n=n, forces=forces, frcs=frcs, peaks=peaks, backbone=backbone,
                         envelope=env, accuracy=acc, log_force=log_force,
                         normalized=normalized, hbm_newton_iterations=hbm_it,
                         vprnm_newton_iterations=backbone.newton_iterations,
                         failures=failures)


def backbone_amplitudes(sys, backbone):
    """Total amplitude at each backbone point."""
    return np.array([total_amplitude(p.X, sys.Nt) for p in backbone])
