import numpy as np
import pytest

from zstack_cs.model import validate_stack
from zstack_cs.phantom import (
    AMPLITUDE_RANGE,
    SIGMA_Z_RANGE,
    PhantomKind,
    dct_energy_fraction,
    generate_phantom,
    generate_phantom_pair,
)


@pytest.mark.parametrize("kind", list(PhantomKind))
def test_same_seed_same_volume(kind):
    a = generate_phantom(8, 9, 30, kind, seed=3, max_value=255)
    b = generate_phantom(8, 9, 30, kind, seed=3, max_value=255)
    assert a.data.tobytes() == b.data.tobytes()
    assert a.shape == (30, 9, 8)
    assert generate_phantom(8, 9, 30, kind, seed=4).data.tobytes() != a.data.tobytes()


@pytest.mark.parametrize("kind", list(PhantomKind))
@pytest.mark.parametrize("max_value", [1.0, 255.0])
def test_phantoms_are_valid_stacks(kind, max_value):
    obs, clean = generate_phantom_pair(10, 6, 40, kind, seed=1, max_value=max_value)
    assert validate_stack(obs).ok and validate_stack(clean).ok
    assert obs.max_value == max_value


def test_band_limited_energy_is_concentrated():
    stack = generate_phantom(8, 8, 64, PhantomKind.BAND_LIMITED_NOISE, seed=0)
    assert dct_energy_fraction(stack, 10).min() >= 0.95
    assert dct_energy_fraction(stack, int(0.15 * 64)).min() >= 0.95


def test_blob_curvature_bound_without_noise():
    clean = generate_phantom(16, 16, 120, PhantomKind.GAUSSIAN_BLOBS, seed=2, snr_db=None)
    d2 = np.abs(np.diff(clean.data, n=2, axis=0))
    bound = 2.0 * AMPLITUDE_RANGE[1] / SIGMA_Z_RANGE[0] ** 2
    assert d2.max() <= bound
    assert SIGMA_Z_RANGE[0] >= 4


def test_noise_level_follows_snr():
    obs, clean = generate_phantom_pair(32, 32, 60, seed=5, snr_db=30.0)
    resid = (obs.data - clean.data)[(clean.data > 0.2) & (clean.data < 0.8)]
    sigma = clean.data.max() / 10 ** (30 / 20)
    assert resid.std() == pytest.approx(sigma, rel=0.05)
    same, same_clean = generate_phantom_pair(32, 32, 60, seed=5, snr_db=None)
    assert np.array_equal(same.data, same_clean.data)


def test_energy_fraction_of_zero_trace_is_one():
    stack = generate_phantom(4, 4, 10, PhantomKind.BAND_LIMITED_NOISE).with_data(np.zeros((10, 4, 4)))
    assert np.all(dct_energy_fraction(stack, 1) == 1.0)


@pytest.mark.parametrize("dims", [(1, 4, 4), (4, 1, 4), (4, 4, 1)])
def test_invalid_dimensions(dims):
    with pytest.raises(ValueError):
        generate_phantom(*dims)
    with pytest.raises(ValueError):
        generate_phantom(4, 4, 4, max_value=0.0)
