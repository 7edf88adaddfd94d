"""Synthetic ground-truth volumes.

Two families:

* ``GaussianBlobs`` -- anisotropic 3D Gaussians (elongated along z, as in an
  axially over-sampled stack) on a constant background, with optional
  additive Gaussian noise. Where blobs overlap enough to pass
  ``PEAK_FRACTION * max_value`` the blob part is scaled down, never clipped.
* ``BandLimitedNoise`` -- white noise band-limited along z in the DCT domain
  and smoothed with a 3x3 box kernel in (y, x); every trace is exactly
  compressible in the DCT basis.
"""
from __future__ import annotations

import enum

import numpy as np
from scipy.ndimage import uniform_filter

from .model import VolumeStack
from .transform import dct_forward, idct

__all__ = [
    "PhantomKind",
    "generate_phantom",
    "generate_phantom_pair",
    "dct_energy_fraction",
    "BACKGROUND_LEVEL",
    "SIGMA_Z_RANGE",
]

BACKGROUND_LEVEL = 0.1  # fraction of max_value
SIGMA_Z_RANGE = (15.0, 40.0)  # voxels
SIGMA_XY_RANGE = (1.5, 4.0)
AMPLITUDE_RANGE = (0.3, 0.7)  # fraction of max_value
BAND_FRACTION = 0.10  # kept share of DCT coefficients for BandLimitedNoise
PEAK_FRACTION = 0.9  # overlapping blobs are rescaled to stay below this share of max_value


class PhantomKind(str, enum.Enum):
    GAUSSIAN_BLOBS = "GaussianBlobs"
    BAND_LIMITED_NOISE = "BandLimitedNoise"


def _blobs(width, height, depth, rng, max_value) -> np.ndarray:
    n_blobs = max(3, depth // 20)
    z = np.arange(depth, dtype=np.float64)[:, None, None]
    y = np.arange(height, dtype=np.float64)[None, :, None]
    x = np.arange(width, dtype=np.float64)[None, None, :]
    vol = np.full((depth, height, width), BACKGROUND_LEVEL * max_value)
    for _ in range(n_blobs):
        cz = rng.uniform(0, depth - 1)
        cy = rng.uniform(0, height - 1)
        cx = rng.uniform(0, width - 1)
        sz = rng.uniform(*SIGMA_Z_RANGE)
        sy = rng.uniform(*SIGMA_XY_RANGE)
        sx = rng.uniform(*SIGMA_XY_RANGE)
        amp = rng.uniform(*AMPLITUDE_RANGE) * max_value
        gz = np.exp(-0.5 * ((z - cz) / sz) ** 2)
        gy = np.exp(-0.5 * ((y - cy) / sy) ** 2)
        gx = np.exp(-0.5 * ((x - cx) / sx) ** 2)
        vol += amp * gz * gy * gx
    # rescale rather than clip: clipping would put kinks into smooth traces
    base = BACKGROUND_LEVEL * max_value
    peak = vol.max()
    ceiling = PEAK_FRACTION * max_value
    if peak > ceiling:
        vol = base + (vol - base) * ((ceiling - base) / (peak - base))
    return vol


def _band_limited(width, height, depth, rng, max_value) -> np.ndarray:
    white = rng.standard_normal((height, width, depth))
    coeffs = dct_forward(white)
    cutoff = max(1, int(BAND_FRACTION * depth))
    coeffs[..., cutoff:] = 0.0
    smooth = idct(coeffs)
    # the (y, x) box filter is linear per z-frequency, so the band limit survives
    smooth = uniform_filter(smooth, size=(3, 3, 1), mode="reflect")
    lo, hi = smooth.min(), smooth.max()
    span = hi - lo if hi > lo else 1.0
    vol = (smooth - lo) / span
    vol = (BACKGROUND_LEVEL + 0.8 * vol) * max_value
    return np.ascontiguousarray(np.moveaxis(vol, -1, 0))


def generate_phantom_pair(
    width: int,
    height: int,
    depth: int,
    kind: PhantomKind | str = PhantomKind.GAUSSIAN_BLOBS,
    seed: int = 0,
    max_value: float = 1.0,
    snr_db: float | None = 30.0,
) -> tuple[VolumeStack, VolumeStack]:
    """Return ``(observed, clean)`` volumes of shape ``(depth, height, width)``.

    For ``GaussianBlobs`` the observed volume carries zero-mean Gaussian noise
    with standard deviation ``peak / 10**(snr_db / 20)`` (``peak`` is the
    clean volume's maximum), clipped to ``[0, max_value]``. ``snr_db=None``
    disables noise. ``BandLimitedNoise`` is always noiseless.
    """
    kind = PhantomKind(kind)
    if min(width, height, depth) < 2:
        raise ValueError("phantom dimensions must all be >= 2")
    if not (max_value > 0 and np.isfinite(max_value)):
        raise ValueError("max_value must be finite and > 0")
    rng = np.random.default_rng(seed)
    if kind is PhantomKind.GAUSSIAN_BLOBS:
        clean = np.clip(_blobs(width, height, depth, rng, max_value), 0.0, max_value)
        observed = clean
        if snr_db is not None:
            sigma = clean.max() / 10.0 ** (snr_db / 20.0)
            observed = np.clip(clean + rng.normal(0.0, sigma, clean.shape), 0.0, max_value)
    else:
        clean = np.clip(_band_limited(width, height, depth, rng, max_value), 0.0, max_value)
        observed = clean
    return VolumeStack(observed, max_value), VolumeStack(clean, max_value)


def generate_phantom(
    width: int,
    height: int,
    depth: int,
    kind: PhantomKind | str = PhantomKind.GAUSSIAN_BLOBS,
    seed: int = 0,
    max_value: float = 1.0,
    snr_db: float | None = 30.0,
) -> VolumeStack:
    """Observed (possibly noisy) phantom; see :func:`generate_phantom_pair`."""
    return generate_phantom_pair(width, height, depth, kind, seed, max_value, snr_db)[0]


def dct_energy_fraction(stack: VolumeStack, n_coeffs: int) -> np.ndarray:
    """Per-pixel share of z-trace energy in the lowest ``n_coeffs`` DCT terms.

    Returns a ``(height, width)`` array; traces with zero energy count as 1.
    """
    traces = np.moveaxis(stack.data, 0, -1)
    coeffs = dct_forward(traces)
    energy = coeffs**2
    total = energy.sum(axis=-1)
    low = energy[..., :n_coeffs].sum(axis=-1)
    return np.where(total > 0, low / np.where(total > 0, total, 1.0), 1.0)
