import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from skimage.metrics import structural_similarity

from zstack_cs.metrics import mse3d, psnr3d, ssim2d, ssim3d
from zstack_cs.model import VolumeStack


def vol(data, max_value=1.0):
    return VolumeStack(np.asarray(data, dtype=float), max_value)


def test_identical_volumes():
    a = vol(np.random.default_rng(0).uniform(0, 1, (3, 16, 16)))
    assert psnr3d(a, a) == math.inf
    assert ssim3d(a, a) == pytest.approx(1.0, abs=1e-12)
    assert ssim3d(a, a, mode="3d") == pytest.approx(1.0, abs=1e-12)


def test_psnr_off_by_one_on_8bit_scale():
    ref = np.full((2, 4, 5), 100.0)
    assert psnr3d(vol(ref + 1.0, 255), vol(ref, 255)) == pytest.approx(48.1308, abs=1e-3)
    assert psnr3d(vol(ref + 1.0, 255), vol(ref, 255)) == pytest.approx(20 * math.log10(255), abs=1e-12)


def test_psnr_formula(rng):
    a = rng.uniform(0, 1, (3, 5, 5))
    b = rng.uniform(0, 1, (3, 5, 5))
    mse = np.mean((a - b) ** 2)
    assert mse3d(vol(a), vol(b)) == pytest.approx(mse, rel=1e-12)
    assert psnr3d(vol(a), vol(b)) == pytest.approx(10 * np.log10(1.0 / mse), rel=1e-12)


def test_mismatched_inputs_rejected():
    with pytest.raises(ValueError):
        psnr3d(vol(np.zeros((2, 3, 3))), vol(np.zeros((2, 3, 4))))
    with pytest.raises(ValueError):
        ssim3d(vol(np.zeros((2, 3, 3)), 1.0), vol(np.zeros((2, 3, 3)), 255.0))
    with pytest.raises(ValueError):
        ssim3d(vol(np.zeros((2, 3, 3))), vol(np.zeros((2, 3, 3))), mode="cube")


@pytest.mark.parametrize("shape", [(24, 24), (11, 11), (40, 17)])
def test_ssim2d_matches_skimage(shape):
    rng = np.random.default_rng(sum(shape))
    x = rng.uniform(0, 255, shape)
    y = np.clip(x + rng.normal(0, 20, shape), 0, 255)
    ref_map = structural_similarity(
        x, y, gaussian_weights=True, sigma=1.5, use_sample_covariance=False, data_range=255, full=True
    )[1]
    pad = 5  # skimage reports the mean over the window-valid interior
    ref = ref_map[pad:-pad, pad:-pad].mean()
    assert ssim2d(x, y, 255) == pytest.approx(ref, abs=1e-10)


def test_luminance_only_single_window():
    # 11x11 constant images: one window, both variances zero, so only the
    # luminance term differs from 1
    ref = np.full((1, 11, 11), 0.5)
    rec = ref + 0.1
    c1 = (0.01 * 1.0) ** 2
    mu_x, mu_y = 0.6, 0.5
    expect = (2 * mu_x * mu_y + c1) / (mu_x**2 + mu_y**2 + c1)
    assert ssim3d(vol(rec), vol(ref)) == pytest.approx(expect, abs=1e-12)


def test_ssim_is_symmetric(rng):
    a = vol(rng.uniform(0, 1, (2, 14, 14)))
    b = vol(rng.uniform(0, 1, (2, 14, 14)))
    assert ssim3d(a, b) == pytest.approx(ssim3d(b, a), abs=1e-15)


def test_slice_order_does_not_matter(rng):
    a = rng.uniform(0, 1, (6, 12, 12))
    b = np.clip(a + rng.normal(0, 0.1, a.shape), 0, 1)
    perm = rng.permutation(6)
    assert ssim3d(vol(a[perm]), vol(b[perm])) == ssim3d(vol(a), vol(b))
    assert psnr3d(vol(a[perm]), vol(b[perm])) == psnr3d(vol(a), vol(b))


def test_more_noise_scores_lower():
    rng = np.random.default_rng(5)
    ref = rng.uniform(0.2, 0.8, (3, 20, 20))
    noise = rng.normal(0, 1, ref.shape)
    scores = [(psnr3d(vol(ref + s * noise), vol(ref)), ssim3d(vol(ref + s * noise), vol(ref))) for s in (0.01, 0.03, 0.1)]
    assert scores[0][0] > scores[1][0] > scores[2][0]
    assert scores[0][1] > scores[1][1] > scores[2][1]


def test_small_slices_use_a_fitting_window(rng):
    a = vol(rng.uniform(0, 1, (3, 4, 6)))
    b = vol(rng.uniform(0, 1, (3, 4, 6)))
    s = ssim3d(a, b)
    assert -1.0 <= s <= 1.0


@given(st.integers(0, 2**16), st.floats(0.0, 0.5))
def test_ssim_in_range(seed, noise):
    rng = np.random.default_rng(seed)
    a = rng.uniform(0, 1, (2, 12, 12))
    b = np.clip(a + rng.normal(0, noise, a.shape), 0, 1)
    for mode in ("slice", "3d"):
        assert -1.0 - 1e-12 <= ssim3d(vol(b), vol(a), mode=mode) <= 1.0 + 1e-12
