"""Volume quality metrics: PSNR over all voxels and SSIM averaged over slices.

Sums go through ``math.fsum`` (exactly rounded), which makes both metrics
independent of voxel and slice order.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.ndimage import correlate1d

from .model import VolumeStack

__all__ = [
    "psnr3d",
    "ssim3d",
    "ssim2d",
    "mse3d",
    "gaussian_window",
    "SSIM_WINDOW",
    "SSIM_SIGMA",
]

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_WINDOW_3D = 7
K1, K2 = 0.01, 0.03


def _check_pair(recon: VolumeStack, reference: VolumeStack) -> None:
    if recon.shape != reference.shape:
        raise ValueError(f"shape mismatch: {recon.shape} vs {reference.shape}")
    if recon.max_value != reference.max_value:
        raise ValueError(
            f"max_value mismatch: {recon.max_value:g} vs {reference.max_value:g}"
        )


def mse3d(recon: VolumeStack, reference: VolumeStack) -> float:
    _check_pair(recon, reference)
    diff = recon.data - reference.data
    return math.fsum((diff * diff).ravel()) / diff.size


def psnr3d(recon: VolumeStack, reference: VolumeStack) -> float:
    """``10 log10(max_value^2 / MSE)`` in dB; ``inf`` for identical volumes."""
    mse = mse3d(recon, reference)
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(recon.max_value**2 / mse)


def gaussian_window(size: int, sigma: float) -> np.ndarray:
    r = (size - 1) / 2.0
    x = np.arange(size) - r
    w = np.exp(-(x**2) / (2.0 * sigma**2))
    return w / w.sum()


def _filter_valid(img: np.ndarray, kernels: list[np.ndarray]) -> np.ndarray:
    """Separable correlation over the leading axes, keeping the 'valid' part."""
    out = img
    for axis, k in enumerate(kernels):
        out = correlate1d(out, k, axis=axis, mode="constant", cval=0.0)
    crop = tuple(slice((k.size - 1) // 2, s - (k.size - 1) // 2) for k, s in zip(kernels, img.shape))
    return out[crop]


def _ssim_map(x: np.ndarray, y: np.ndarray, kernels, data_range: float) -> np.ndarray:
    c1 = (K1 * data_range) ** 2
    c2 = (K2 * data_range) ** 2
    mu_x = _filter_valid(x, kernels)
    mu_y = _filter_valid(y, kernels)
    xx = _filter_valid(x * x, kernels)
    yy = _filter_valid(y * y, kernels)
    xy = _filter_valid(x * y, kernels)
    mxy = mu_x * mu_y
    var_x = xx - mu_x * mu_x
    var_y = yy - mu_y * mu_y
    cov = xy - mxy
    num = (2.0 * mxy + c1) * (2.0 * cov + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
    return num / den


def _window_for(shape: tuple[int, ...]) -> list[np.ndarray]:
    if min(shape) >= SSIM_WINDOW:
        w = gaussian_window(SSIM_WINDOW, SSIM_SIGMA)
        return [w] * len(shape)
    # small slices: uniform window of the largest odd size that fits
    size = min(shape)
    size = size if size % 2 else size - 1
    w = np.full(size, 1.0 / size)
    return [w] * len(shape)


def ssim2d(x: np.ndarray, y: np.ndarray, data_range: float) -> float:
    """Mean SSIM of two 2D images (11x11 Gaussian window, sigma 1.5)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    smap = _ssim_map(x, y, _window_for(x.shape), data_range)
    return math.fsum(smap.ravel()) / smap.size


def ssim3d(recon: VolumeStack, reference: VolumeStack, mode: str = "slice") -> float:
    """Volume SSIM.

    ``mode="slice"`` (default): mean of per-slice 2D SSIM. ``mode="3d"``:
    a 7x7x7 uniform window over the volume (clipped to the smallest axis).
    """
    _check_pair(recon, reference)
    rng = recon.max_value
    if mode == "slice":
        per_slice = [ssim2d(a, b, rng) for a, b in zip(recon.data, reference.data)]
        return math.fsum(per_slice) / len(per_slice)
    if mode == "3d":
        size = min(SSIM_WINDOW_3D, min(recon.shape))
        size = size if size % 2 else size - 1
        w = np.full(size, 1.0 / size)
        smap = _ssim_map(recon.data, reference.data, [w, w, w], rng)
        return math.fsum(smap.ravel()) / smap.size
    raise ValueError(f"unknown SSIM mode {mode!r}; expected 'slice' or '3d'")
