"""Colour image restoration with double-opponent vectorial total variation.

The energy couples per-channel derivatives with derivatives of pairwise
channel differences and supports non-convex exponents and second-order
terms. Two solvers are provided: a half-quadratic reference solver
(:func:`hqa_solve`) and a split-Bregman solver (:func:`bregman_solve`).
"""

from importlib.resources import files

from ._validation import DimensionError, NumericalFailure
from .bregman import BregmanState, ConfigurationError, bregman_energy, bregman_solve, shrink, vtv_energy
from .color import gamma_map, metric_eigensystem, opponent_forward, opponent_inverse, to_lhs
from .config import ConvergenceTrace, SolverConfig, stopping_threshold
from .degradation import (
    DegradationSpec,
    add_opponent_noise,
    degrade,
    make_inpaint_mask_from_overlay,
    make_synthetic_isoluminant,
    noise_covariance_rgb,
)
from .estimators import OpponentVTVDeblurrer, OpponentVTVDenoiser, OpponentVTVInpainter
from .hqa import Restoration, energy_phi, hqa_solve, majorizer_F
from .image import clamp01, from_flat, to_flat
from .metrics import MetricsReport, ciede2000, evaluate, psnr, ssim
from .operators import BlurKernel, LinearMap, blur_map, gradient_map, mask_map, motion_kernel

__version__ = "0.1.0"


def sample_image_path():
    """Path of the bundled 96x96 sharp test image."""
    return files("dovtv") / "data" / "shapes.png"


__all__ = [
    "BlurKernel", "BregmanState", "ConfigurationError", "ConvergenceTrace", "DegradationSpec",
    "DimensionError", "LinearMap", "MetricsReport", "NumericalFailure", "OpponentVTVDeblurrer",
    "OpponentVTVDenoiser", "OpponentVTVInpainter", "Restoration", "SolverConfig",
    "add_opponent_noise", "blur_map", "bregman_energy", "bregman_solve", "ciede2000", "clamp01",
    "degrade", "energy_phi", "evaluate", "from_flat", "gamma_map", "gradient_map", "hqa_solve",
    "majorizer_F", "make_inpaint_mask_from_overlay", "make_synthetic_isoluminant", "mask_map",
    "metric_eigensystem", "motion_kernel", "noise_covariance_rgb", "opponent_forward",
    "opponent_inverse", "psnr", "sample_image_path", "shrink", "ssim", "stopping_threshold",
    "to_flat", "to_lhs", "vtv_energy",
]
