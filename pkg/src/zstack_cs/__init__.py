"""Reconstruct fluorescence z-stacks from a random subset of slices.

Each pixel's z-profile is recovered by L1-regularized least squares in the
DCT domain (basis-pursuit denoising) solved with OWL-QN; linear and natural
cubic-spline interpolation serve as baselines.
"""
from .model import PixelTrace, SamplingMask, Strategy, VolumeStack, validate_stack
from .optimizer import SolverOptions, SolverResult, minimize
from .reconstruct import Method, RunStats, reconstruct_volume
from .sampling import apply_mask, generate_mask

__version__ = "0.1.0"

__all__ = [
    "PixelTrace",
    "SamplingMask",
    "Strategy",
    "VolumeStack",
    "validate_stack",
    "SolverOptions",
    "SolverResult",
    "minimize",
    "Method",
    "RunStats",
    "reconstruct_volume",
    "apply_mask",
    "generate_mask",
]
