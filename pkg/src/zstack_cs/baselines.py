"""Interpolation along z: piecewise-linear and natural cubic spline.

Both work on a batch of traces that share their sample positions, one trace
per row, and evaluate at every integer z of the full grid. All arithmetic is
elementwise across rows, so a trace's output does not depend on the batch.
"""
from __future__ import annotations

import numpy as np

from .model import PixelTrace

__all__ = [
    "interpolate_linear",
    "interpolate_cubic_spline",
    "linear_rows",
    "cubic_spline_rows",
    "natural_spline_second_derivatives",
]


def _check_knots(idx: np.ndarray, n_total: int) -> None:
    if idx.shape[0] < 2:
        raise ValueError("interpolation needs at least two samples")
    if np.any(np.diff(idx) <= 0):
        raise ValueError("sample positions must be strictly increasing")
    if idx[0] != 0 or idx[-1] != n_total - 1:
        raise ValueError("both endpoints must be sampled")


def _segments(idx: np.ndarray, n_total: int):
    z = np.arange(n_total)
    seg = np.searchsorted(idx, z, side="right") - 1
    seg = np.clip(seg, 0, idx.shape[0] - 2)
    return z, seg


def linear_rows(values, indices, n_total: int) -> np.ndarray:
    """Piecewise-linear interpolation of each row of ``values`` (``(B, M)``)."""
    vals = np.array(values, dtype=np.float64, ndmin=2)
    idx = np.asarray(indices, dtype=np.intp)
    _check_knots(idx, n_total)
    z, seg = _segments(idx, n_total)
    z0 = idx[seg]
    w = (z - z0) / (idx[seg + 1] - z0)
    left = vals[:, seg]
    right = vals[:, seg + 1]
    out = left + w * (right - left)
    out[:, idx] = vals  # the last knot sits at w == 1, not exact in floating point
    return out


def natural_spline_second_derivatives(values, indices) -> np.ndarray:
    """Second derivatives at the knots of the natural cubic spline.

    Solves the tridiagonal system (Thomas algorithm) for every row of
    ``values`` at once; the end values are fixed at zero.
    """
    vals = np.array(values, dtype=np.float64, ndmin=2)
    x = np.asarray(indices, dtype=np.float64)
    m = x.shape[0]
    out = np.zeros_like(vals)
    if m <= 2:
        return out
    h = np.diff(x)
    slope = np.diff(vals, axis=1) / h
    rhs = 6.0 * (slope[:, 1:] - slope[:, :-1])  # (B, m - 2)
    lower = h[1:-1]
    diag = 2.0 * (h[:-1] + h[1:])
    upper = h[1:-1]
    k = m - 2
    cp = np.empty(k)
    dp = np.empty_like(rhs)
    cp[0] = upper[0] / diag[0] if k > 1 else 0.0
    dp[:, 0] = rhs[:, 0] / diag[0]
    for i in range(1, k):
        denom = diag[i] - lower[i - 1] * cp[i - 1]
        if i < k - 1:
            cp[i] = upper[i] / denom
        dp[:, i] = (rhs[:, i] - lower[i - 1] * dp[:, i - 1]) / denom
    sol = np.empty_like(rhs)
    sol[:, -1] = dp[:, -1]
    for i in range(k - 2, -1, -1):
        sol[:, i] = dp[:, i] - cp[i] * sol[:, i + 1]
    out[:, 1:-1] = sol
    return out


def cubic_spline_rows(values, indices, n_total: int, at=None) -> np.ndarray:
    """Natural cubic spline through each row, evaluated at integer z.

    ``at`` optionally gives other evaluation points inside the knot range.
    """
    vals = np.array(values, dtype=np.float64, ndmin=2)
    idx = np.asarray(indices, dtype=np.intp)
    _check_knots(idx, n_total)
    x = idx.astype(np.float64)
    second = natural_spline_second_derivatives(vals, idx)
    if at is None:
        z = np.arange(n_total, dtype=np.float64)
    else:
        z = np.asarray(at, dtype=np.float64)
    seg = np.clip(np.searchsorted(x, z, side="right") - 1, 0, x.shape[0] - 2)
    h = (x[seg + 1] - x[seg])
    t = z - x[seg]
    y0 = vals[:, seg]
    y1 = vals[:, seg + 1]
    m0 = second[:, seg]
    m1 = second[:, seg + 1]
    # Horner form in t; t == 0 returns the knot value exactly
    b = (y1 - y0) / h - h * (2.0 * m0 + m1) / 6.0
    c = m0 / 2.0
    d = (m1 - m0) / (6.0 * h)
    out = y0 + t * (b + t * (c + t * d))
    if at is None:
        out[:, idx] = vals  # last knot is evaluated at t == h
    return out


def interpolate_linear(trace: PixelTrace) -> np.ndarray:
    return linear_rows(trace.values[None, :], trace.indices, trace.n_total)[0]


def interpolate_cubic_spline(trace: PixelTrace) -> np.ndarray:
    """Natural cubic spline; reduces to the straight line when M == 2."""
    return cubic_spline_rows(trace.values[None, :], trace.indices, trace.n_total)[0]
