import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.interpolate import CubicSpline

from zstack_cs.baselines import (
    cubic_spline_rows,
    interpolate_cubic_spline,
    interpolate_linear,
    linear_rows,
    natural_spline_second_derivatives,
)
from zstack_cs.model import PixelTrace

from oracles import natural_spline_3knots_at


@st.composite
def traces(draw, min_n=2, max_n=60):
    n = draw(st.integers(min_n, max_n))
    inner = draw(st.sets(st.integers(1, n - 2), max_size=n - 2)) if n > 2 else set()
    idx = np.array(sorted({0, n - 1} | inner))
    vals = np.array(draw(st.lists(st.floats(-100, 100), min_size=idx.size, max_size=idx.size)))
    return PixelTrace(vals, idx, n)


def test_linear_midpoint():
    out = interpolate_linear(PixelTrace([0.0, 10.0], [0, 10], 11))
    assert out[5] == 5.0


def test_linear_hand_evaluation():
    out = interpolate_linear(PixelTrace([1.0, 3.0, 1.0], [0, 4, 8], 9))
    assert out[2] == pytest.approx(2.0) and out[6] == pytest.approx(2.0)


def test_full_sampling_is_identity(rng):
    vals = rng.standard_normal(12)
    t = PixelTrace(vals, np.arange(12), 12)
    np.testing.assert_array_equal(interpolate_linear(t), vals)
    np.testing.assert_array_equal(interpolate_cubic_spline(t), vals)


def test_three_knot_spline_value():
    got = cubic_spline_rows([[0.0, 1.0, 0.0]], [0, 1, 2], 3, at=[0.5])[0, 0]
    assert got == pytest.approx(0.6875, abs=1e-12)
    assert got == pytest.approx(natural_spline_3knots_at(0.0, 1.0, 0.0, 0.5), abs=1e-12)


def test_two_knots_give_a_straight_line():
    t = PixelTrace([2.0, 8.0], [0, 6], 7)
    np.testing.assert_allclose(interpolate_cubic_spline(t), np.linspace(2, 8, 7), atol=1e-12)


@given(traces(), st.floats(-5, 5), st.floats(-50, 50))
def test_spline_reproduces_lines(t, a, b):
    line = a * np.arange(t.n_total) + b
    out = interpolate_cubic_spline(PixelTrace(line[t.indices], t.indices, t.n_total))
    np.testing.assert_allclose(out, line, atol=1e-10 * max(1.0, np.abs(line).max()))


@given(traces(min_n=3))
def test_spline_matches_scipy_natural_spline(t):
    ref = CubicSpline(t.indices, t.values, bc_type="natural")(np.arange(t.n_total))
    out = interpolate_cubic_spline(t)
    np.testing.assert_allclose(out, ref, atol=1e-9 * max(1.0, np.abs(t.values).max()))


@given(traces())
def test_knots_are_interpolated_exactly(t):
    np.testing.assert_array_equal(interpolate_cubic_spline(t)[t.indices], t.values)
    np.testing.assert_array_equal(interpolate_linear(t)[t.indices], t.values)


@given(traces())
def test_linear_stays_within_neighbouring_samples(t):
    out = interpolate_linear(t)
    for a, b in zip(range(t.m - 1), range(1, t.m)):
        seg = out[t.indices[a] : t.indices[b] + 1]
        lo, hi = sorted((t.values[a], t.values[b]))
        assert seg.min() >= lo - 1e-12 and seg.max() <= hi + 1e-12


def test_second_derivatives_vanish_at_ends(rng):
    m2 = natural_spline_second_derivatives(rng.standard_normal((3, 6)), [0, 2, 3, 7, 8, 12])
    assert np.all(m2[:, 0] == 0) and np.all(m2[:, -1] == 0)


def test_rows_are_independent(rng):
    idx = np.array([0, 3, 4, 9, 15])
    vals = rng.standard_normal((6, 5))
    batch = cubic_spline_rows(vals, idx, 16)
    for i in range(6):
        np.testing.assert_array_equal(batch[i], cubic_spline_rows(vals[i : i + 1], idx, 16)[0])
    lin = linear_rows(vals, idx, 16)
    np.testing.assert_array_equal(lin[2], linear_rows(vals[2:3], idx, 16)[0])


@pytest.mark.parametrize("idx", [[0], [1, 5], [0, 4], [0, 3, 3, 5]])
def test_bad_knots_rejected(idx):
    with pytest.raises(ValueError):
        linear_rows(np.zeros((1, len(idx))), idx, 6)
    with pytest.raises(ValueError):
        cubic_spline_rows(np.zeros((1, len(idx))), idx, 6)
