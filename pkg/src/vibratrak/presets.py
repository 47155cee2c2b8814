"""Reference systems: unit mass, ``c = 0.01`` and unit linearized stiffness."""

from .model import (CubicDamping, Iwan, Jenkins, QuinticStiffness, SofteningDuffing,
                    SofteningII, StiffeningDuffing, SystemConfig, UnilateralSpring)

M = 1.0
C = 0.01
F_S = 0.2
K_T = 0.25


def _build(name, n_sliders=100):
    if name == "stiffening_duffing":
        return 1.0, StiffeningDuffing(alpha=1.0), 1.0
    if name == "quintic":
        return 1.0, QuinticStiffness(eta=1.0), 1.0
    if name == "softening_duffing":
        return 1.0, SofteningDuffing(alpha=-2.5e-4), 1.0
    if name == "softening_ii":
        return 0.75, SofteningII(K_T, F_S, chi=0.0, beta=0.0), 1.6
    if name == "unilateral_spring":
        return 0.75, UnilateralSpring(k_nl=0.5), 1.0
    if name == "cubic_damping":
        return 1.0, CubicDamping(gamma=0.03), 1.0
    if name == "jenkins":
        return 0.75, Jenkins(K_T, F_S), F_S / K_T
    if name == "iwan":
        return 0.75, Iwan(K_T, F_S, chi=-0.5, beta=0.0, n_sliders=n_sliders), 2.4
    raise KeyError(f"no preset named {name!r}; choose from {', '.join(PRESETS)}")


PRESETS = ("stiffening_duffing", "quintic", "softening_duffing", "softening_ii",
           "unilateral_spring", "cubic_damping", "jenkins", "iwan")


def preset_system(name, H=3, Nt=1024, n_sliders=100):
    """Return the reference :class:`SystemConfig` for a force law name."""
    k, force, x_ref = _build(name, n_sliders)
    return SystemConfig(m=M, c=C, k=k, force=force, H=H, Nt=Nt, x_ref=x_ref)
