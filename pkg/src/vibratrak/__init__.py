"""Harmonic balance and superharmonic resonance tracking for forced SDOF oscillators."""

__version__ = "0.1.0"

from .model import SystemConfig, nondimensionalize, dimensionalize  # noqa: E402
from .presets import PRESETS, preset_system  # noqa: E402
from .hbm import solve_hbm, hbm_residual, NonConvergence  # noqa: E402
from .continuation import ContinuationConfig, compute_frc, continue_branch  # noqa: E402
from .vprnm import solve_vprnm, vprnm_backbone, broadband_force  # noqa: E402
from .analysis import compare_superharmonic, apriori_sweep, accuracy_metric  # noqa: E402

__all__ = [
    "SystemConfig", "nondimensionalize", "dimensionalize", "PRESETS", "preset_system",
    "solve_hbm", "hbm_residual", "NonConvergence", "ContinuationConfig", "compute_frc",
    "continue_branch", "solve_vprnm", "vprnm_backbone", "broadband_force",
    "compare_superharmonic", "apriori_sweep", "accuracy_metric", "__version__",
]
