"""Random slice masks and stack subsampling.

Masks are drawn with NumPy's ``default_rng(seed)``, i.e. the PCG64 bit
generator, whose output stream for a given seed is fixed across platforms.
Both endpoints are always kept so interpolation never extrapolates.
"""
from __future__ import annotations

import numpy as np

from .model import SamplingMask, Strategy, VolumeStack

__all__ = ["n_kept", "generate_mask", "apply_mask"]


def n_kept(n_slices: int, fraction: float) -> int:
    """``round(fraction * n_slices)`` with halves rounded up."""
    return int(np.floor(fraction * n_slices + 0.5))


def generate_mask(
    n_slices: int,
    fraction: float,
    seed: int = 0,
    strategy: Strategy | str = Strategy.RANDOM_WITH_ENDPOINTS,
) -> SamplingMask:
    strategy = Strategy(strategy)
    if n_slices < 2:
        raise ValueError("n_slices must be >= 2")
    if not (0.0 < fraction <= 1.0):
        raise ValueError(f"fraction must lie in (0, 1], got {fraction}")
    m = n_kept(n_slices, fraction)
    if m < 2:
        raise ValueError(
            f"fraction {fraction} keeps {m} of {n_slices} slices; at least 2 are required"
        )
    rng = np.random.default_rng(seed)
    n_inner = m - 2
    if n_inner == 0:
        inner = np.empty(0, dtype=np.int64)
    elif n_inner == n_slices - 2:
        inner = np.arange(1, n_slices - 1)
    elif strategy is Strategy.RANDOM_WITH_ENDPOINTS:
        inner = 1 + rng.choice(n_slices - 2, size=n_inner, replace=False)
    else:
        # n_inner equal-width bins over [1, n_slices - 2], one draw per bin
        edges = 1 + (np.arange(n_inner + 1) * (n_slices - 2)) // n_inner
        inner = rng.integers(edges[:-1], edges[1:])
    kept = np.concatenate(([0], np.sort(inner), [n_slices - 1]))
    return SamplingMask(n_slices, tuple(int(k) for k in kept), int(seed), strategy, float(fraction))


def apply_mask(stack: VolumeStack, mask: SamplingMask) -> tuple[VolumeStack, SamplingMask]:
    """Keep only the slices listed in ``mask`` (bit-exact copies, in order)."""
    if mask.n_slices != stack.depth:
        raise ValueError(
            f"mask is for {mask.n_slices} slices but the stack has depth {stack.depth}"
        )
    return VolumeStack(stack.data[mask.indices], stack.max_value), mask
