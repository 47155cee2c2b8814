"""
SDOF system definition and the nonlinear force laws.

The system is ``m x'' + c x' + k x + f_nl(x, x') = F cos(omega t)``. Eight
force laws are supported; six are evaluated pointwise from ``(x, v)`` and two
(Jenkins, Iwan) are hysteretic and carry a state between evaluations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Optional, Union

import numpy as np


class ModelError(ValueError):
    """Invalid model parameters or a force law used outside its contract."""


# --------------------------------------------------------------------------
# Force laws
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class StiffeningDuffing:
    """Cubic stiffness ``alpha x**3`` with ``alpha >= 0``."""

    alpha: float

    kind = "stiffening_duffing"

    def __post_init__(self):
        if self.alpha < 0:
            raise ModelError("StiffeningDuffing requires alpha >= 0")


@dataclass(frozen=True)
class QuinticStiffness:
    """Quintic stiffness ``eta x**5``."""

    eta: float

    kind = "quintic"


@dataclass(frozen=True)
class SofteningDuffing:
    """Cubic stiffness ``alpha x**3`` with ``alpha < 0``."""

    alpha: float

    kind = "softening_duffing"

    def __post_init__(self):
        if not self.alpha < 0:
            raise ModelError("SofteningDuffing requires alpha < 0")


@dataclass(frozen=True)
class SofteningII:
    """Conservative softening spring following the 4-parameter Iwan backbone.

    Parameters
    ----------
    k_t : float
        Initial stiffness.
    F_s : float
        Saturation force reached at ``phi_max``.
    chi : float
        Shape exponent, ``-1 < chi <= 0``.
    beta : float
        Slope discontinuity at saturation, ``beta >= 0``.
    """

    k_t: float
    F_s: float
    chi: float = 0.0
    beta: float = 0.0

    kind = "softening_ii"

    def __post_init__(self):
        _check_iwan_params(self.k_t, self.F_s, self.chi, self.beta)


@dataclass(frozen=True)
class UnilateralSpring:
    """One-sided spring ``max(k_nl x, 0)``."""

    k_nl: float

    kind = "unilateral_spring"


@dataclass(frozen=True)
class CubicDamping:
    """Cubic damper ``gamma v**3``."""

    gamma: float

    kind = "cubic_damping"


@dataclass(frozen=True)
class Jenkins:
    """Elastic, perfectly-plastic stick-slip element."""

    k_t: float
    F_s: float

    kind = "jenkins"

    def __post_init__(self):
        if not (self.k_t > 0 and self.F_s > 0):
            raise ModelError("Jenkins requires k_t > 0 and F_s > 0")


@dataclass(frozen=True)
class Iwan:
    """4-parameter Iwan element discretized into parallel Jenkins sliders.

    ``n_sliders`` sliders cover the continuous part of the strength
    distribution; one extra slider at ``phi_max`` carries the Dirac part.
    """

    k_t: float
    F_s: float
    chi: float
    beta: float = 0.0
    n_sliders: int = 100

    kind = "iwan"

    def __post_init__(self):
        _check_iwan_params(self.k_t, self.F_s, self.chi, self.beta)
        if self.n_sliders < 2:
            raise ModelError("Iwan requires n_sliders >= 2")


ForceModel = Union[StiffeningDuffing, QuinticStiffness, SofteningDuffing,
                   SofteningII, UnilateralSpring, CubicDamping, Jenkins, Iwan]

FORCE_KINDS = {cls.kind: cls for cls in (
    StiffeningDuffing, QuinticStiffness, SofteningDuffing, SofteningII,
    UnilateralSpring, CubicDamping, Jenkins, Iwan)}

HYSTERETIC = (Jenkins, Iwan)
# Zero work per cycle under any periodic motion.
CONSERVATIVE = (StiffeningDuffing, QuinticStiffness, SofteningDuffing,
                SofteningII, UnilateralSpring)
ODD = (StiffeningDuffing, QuinticStiffness, SofteningDuffing, SofteningII,
       CubicDamping, Jenkins, Iwan)


def is_hysteretic(force):
    return isinstance(force, HYSTERETIC)


def _check_iwan_params(k_t, F_s, chi, beta):
    if not (k_t > 0 and F_s > 0):
        raise ModelError("k_t and F_s must be positive")
    if chi <= -1:
        raise ModelError("chi <= -1 gives a non-integrable slider distribution")
    if chi > 0:
        raise ModelError("chi must lie in (-1, 0]")
    if beta < 0:
        raise ModelError("beta must be non-negative")


def phi_max(F_s, k_t, chi, beta):
    """Displacement at which the Iwan backbone reaches ``F_s``."""
    if chi <= -1:
        raise ModelError("chi <= -1 gives a non-integrable slider distribution")
    return F_s * (1 + beta) / (k_t * (beta + (chi + 1) / (chi + 2)))


def linearized_stiffness(force):
    """Slope of the nonlinear force at ``x = 0, v = 0``.

    The unilateral spring has no derivative at the origin; it is split as
    ``k_nl/2 x + k_nl/2 |x|`` and the linear half is returned.
    """
    if isinstance(force, (SofteningII, Jenkins, Iwan)):
        return float(force.k_t)
    if isinstance(force, UnilateralSpring):
        return force.k_nl / 2.0
    return 0.0


# --------------------------------------------------------------------------
# Pointwise evaluation
# --------------------------------------------------------------------------

def eval_instantaneous(force, x, v):
    """Force and partial derivatives of a non-hysteretic law.

    Parameters
    ----------
    force : ForceModel
        Any non-hysteretic law.
    x, v : float or numpy.ndarray
        Displacement and velocity samples (broadcast together).

    Returns
    -------
    f, df_dx, df_dv : numpy.ndarray
        Force and exact partial derivatives. For the unilateral spring the
        derivative at ``x = 0`` is the right limit ``k_nl``.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    x, v = np.broadcast_arrays(x, v)
    zeros = np.zeros_like(x)

    if isinstance(force, (StiffeningDuffing, SofteningDuffing)):
        a = force.alpha
        return a * x**3, 3 * a * x**2, zeros
    if isinstance(force, QuinticStiffness):
        e = force.eta
        return e * x**5, 5 * e * x**4, zeros
    if isinstance(force, CubicDamping):
        g = force.gamma
        return g * v**3, zeros, 3 * g * v**2
    if isinstance(force, UnilateralSpring):
        on = x >= 0
        return np.where(on, force.k_nl * x, 0.0), np.where(on, force.k_nl, 0.0), zeros
    if isinstance(force, SofteningII):
        return (*_softening_ii(force, x), zeros)
    if is_hysteretic(force):
        raise ModelError(
            f"{type(force).__name__} is hysteretic; use eval_hysteretic_step")
    raise ModelError(f"unknown force model {force!r}")


def _softening_ii(force, x):
    k_t, F_s, chi, beta = force.k_t, force.F_s, force.chi, force.beta
    pmax = phi_max(F_s, k_t, chi, beta)
    B = beta + (chi + 1) / (chi + 2)
    coef = (k_t * B / (F_s * (1 + beta)))**(1 + chi) * k_t / ((1 + beta) * (chi + 2))
    ax = np.abs(x)
    sx = np.sign(x)
    inside = ax < pmax
    f = np.where(inside, k_t * x - coef * ax**(chi + 2) * sx, F_s * sx)
    df = np.where(inside, k_t - coef * (chi + 2) * ax**(chi + 1), 0.0)
    return f, df


def iwan_backbone(force, x):
    """Monotonic first-loading force of the continuous 4-parameter Iwan model."""
    return _softening_ii(SofteningII(force.k_t, force.F_s, force.chi, force.beta),
                         np.asarray(x, dtype=float))[0]


# --------------------------------------------------------------------------
# Hysteretic evaluation
# --------------------------------------------------------------------------

@lru_cache(maxsize=32)
def _iwan_sliders(force):
    pmax = phi_max(force.F_s, force.k_t, force.chi, force.beta)
    B = force.beta + (force.chi + 1) / (force.chi + 2)
    chi = force.chi
    amp = force.F_s * (chi + 1) / (pmax**(chi + 2) * B)
    edges = np.linspace(0.0, pmax, force.n_sliders + 1)
    # Exact density mass per cell, slider placed at the cell's mass centroid,
    # so total stiffness is k_t and total slip force is F_s.
    mass = amp * np.diff(edges**(chi + 1)) / (chi + 1)
    moment = amp * np.diff(edges**(chi + 2)) / (chi + 2)
    strength = moment / mass
    dirac = force.F_s * force.beta / (pmax * B)
    strength = np.append(strength, pmax)
    weight = np.append(mass, dirac)
    strength.setflags(write=False)
    weight.setflags(write=False)
    return strength, weight


def iwan_sliders(force):
    """Slider strengths and weights of a discretized Iwan element.

    Returns
    -------
    strength : (n_sliders + 1,) numpy.ndarray
        Slip displacement of each slider; the last entry is ``phi_max``.
    weight : (n_sliders + 1,) numpy.ndarray
        Stiffness carried by each slider. ``weight.sum() == k_t`` and
        ``weight @ strength == F_s`` up to rounding.
    """
    return _iwan_sliders(force)


@dataclass
class HystereticState:
    """Previous displacement and element force(s).

    ``f0`` is a float for Jenkins and a per-slider array of slider
    displacements (bounded by slider strength) for Iwan.
    """

    x0: float
    f0: Union[float, np.ndarray]

    @classmethod
    def relaxed(cls, force):
        """Unloaded element at zero displacement."""
        if isinstance(force, Jenkins):
            return cls(0.0, 0.0)
        if isinstance(force, Iwan):
            return cls(0.0, np.zeros(force.n_sliders + 1))
        raise ModelError(f"{type(force).__name__} has no hysteretic state")

    @classmethod
    def loaded_to(cls, force, x):
        """State after monotonic loading from the relaxed element to ``x``."""
        _, state, _ = eval_hysteretic_step(force, x, cls.relaxed(force))
        return state


def eval_hysteretic_step(force, x, state):
    """Advance a Jenkins or Iwan element to displacement ``x``.

    Returns
    -------
    f : float
        Element force, ``|f| <= F_s``.
    state : HystereticState
        New state at ``x``.
    df_dx : float
        Local tangent: ``k_t`` times the stuck fraction.
    """
    if isinstance(force, Jenkins):
        f_stuck = force.k_t * (x - state.x0) + state.f0
        if abs(f_stuck) < force.F_s:
            return f_stuck, HystereticState(x, f_stuck), force.k_t
        f = math.copysign(force.F_s, f_stuck)
        return f, HystereticState(x, f), 0.0

    if isinstance(force, Iwan):
        strength, weight = iwan_sliders(force)
        f0 = np.asarray(state.f0, dtype=float)
        if f0.shape != strength.shape:
            raise ModelError(
                f"state has {f0.size} sliders, element has {strength.size}")
        trial = x - state.x0 + f0
        stuck = np.abs(trial) < strength
        fphi = np.where(stuck, trial, np.copysign(strength, trial))
        return float(weight @ fphi), HystereticState(x, fphi), float(weight @ stuck)

    raise ModelError(f"{type(force).__name__} is not hysteretic")


# --------------------------------------------------------------------------
# System and scalings
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SystemConfig:
    """Forced SDOF oscillator with one nonlinear force.

    Parameters
    ----------
    m, c, k : float
        Mass, viscous damping and linear stiffness.
    force : ForceModel or None
        Nonlinear force law; ``None`` gives the linear oscillator.
    H : int
        Highest harmonic.
    Nt : int
        Time samples per period for AFT (power of two, ``>= 4 H``).
    x_ref : float
        Reference displacement for nondimensional output.
    """

    m: float
    c: float
    k: float
    force: Optional[ForceModel]
    H: int = 3
    Nt: int = 1024
    x_ref: float = 1.0

    def __post_init__(self):
        if not self.m > 0:
            raise ModelError("m must be positive")
        if self.c < 0 or self.k < 0:
            raise ModelError("c and k must be non-negative")
        if int(self.H) != self.H or self.H < 1:
            raise ModelError("H must be a positive integer")
        if self.Nt < 4 or self.Nt & (self.Nt - 1):
            raise ModelError("Nt must be a power of two")
        if self.Nt < 4 * self.H:
            raise ModelError(f"Nt={self.Nt} is below the anti-aliasing floor 4H={4 * self.H}")
        if not self.x_ref > 0:
            raise ModelError("x_ref must be positive")

    @property
    def k_lin(self):
        return self.k + linearized_stiffness(self.force)

    @property
    def n_dof(self):
        """Length of the harmonic vector, ``2H + 1``."""
        return 2 * self.H + 1

    def with_harmonics(self, H, Nt=None):
        return replace(self, H=H, Nt=self.Nt if Nt is None else Nt)


@dataclass(frozen=True)
class Scales:
    """Nondimensional scalings of a system.

    ``params`` holds the hatted force parameters keyed by their plain name
    (``k_t``, ``k_nl``, ``alpha``, ``eta``, ``gamma``, ``F_s``); shape
    parameters ``chi``, ``beta`` and ``n_sliders`` are copied unchanged.
    """

    omega0: float
    zeta0: float
    k_lin: float
    x_ref: float
    m: float
    k_hat: float
    params: dict = field(default_factory=dict)

    @property
    def force_unit(self):
        return self.k_lin * self.x_ref

    def F_hat(self, F):
        return F / self.force_unit

    def F_dim(self, F_hat):
        return F_hat * self.force_unit

    def omega_hat(self, omega):
        return omega / self.omega0

    def omega_dim(self, omega_hat):
        return omega_hat * self.omega0


def nondimensionalize(sys):
    """Compute the nondimensional scalings of ``sys``."""
    k_lin = sys.k_lin
    x_ref = sys.x_ref
    omega0 = math.sqrt(k_lin / sys.m)
    zeta0 = sys.c / (2 * math.sqrt(k_lin * sys.m))
    f = sys.force
    p = {}
    if f is None:
        pass
    elif isinstance(f, (StiffeningDuffing, SofteningDuffing)):
        p["alpha"] = f.alpha * x_ref**2 / k_lin
    elif isinstance(f, QuinticStiffness):
        p["eta"] = f.eta * x_ref**4 / k_lin
    elif isinstance(f, CubicDamping):
        p["gamma"] = f.gamma * (omega0 * x_ref)**3 / (k_lin * x_ref)
    elif isinstance(f, UnilateralSpring):
        p["k_nl"] = f.k_nl / k_lin
    else:
        p["k_t"] = f.k_t / k_lin
        p["F_s"] = f.F_s / (k_lin * x_ref)
        if isinstance(f, (SofteningII, Iwan)):
            p["chi"] = f.chi
            p["beta"] = f.beta
        if isinstance(f, Iwan):
            p["n_sliders"] = f.n_sliders
    return Scales(omega0=omega0, zeta0=zeta0, k_lin=k_lin, x_ref=x_ref,
                  m=sys.m, k_hat=sys.k / k_lin, params=p)


def dimensionalize(scales, kind, H=3, Nt=1024):
    """Rebuild a dimensional :class:`SystemConfig` from hatted quantities.

    Inverse of :func:`nondimensionalize`; ``kind`` selects the force law
    (``None`` for a linear system).
    """
    k_lin, x_ref, m = scales.k_lin, scales.x_ref, scales.m
    omega0 = math.sqrt(k_lin / m)
    p = scales.params
    cls = None if kind is None else FORCE_KINDS[kind]
    if cls is None:
        force = None
    elif cls in (StiffeningDuffing, SofteningDuffing):
        force = cls(alpha=p["alpha"] * k_lin / x_ref**2)
    elif cls is QuinticStiffness:
        force = cls(eta=p["eta"] * k_lin / x_ref**4)
    elif cls is CubicDamping:
        force = cls(gamma=p["gamma"] * k_lin * x_ref / (omega0 * x_ref)**3)
    elif cls is UnilateralSpring:
        force = cls(k_nl=p["k_nl"] * k_lin)
    else:
        kw = dict(k_t=p["k_t"] * k_lin, F_s=p["F_s"] * k_lin * x_ref)
        if cls in (SofteningII, Iwan):
            kw.update(chi=p["chi"], beta=p["beta"])
        if cls is Iwan:
            kw["n_sliders"] = p.get("n_sliders", 100)
        force = cls(**kw)
    c = scales.zeta0 * 2 * math.sqrt(k_lin * m)
    return SystemConfig(m=m, c=c, k=scales.k_hat * k_lin, force=force,
                        H=H, Nt=Nt, x_ref=x_ref)
