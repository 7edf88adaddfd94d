"""Orthonormal 1D DCT-II / DCT-III along the last axis.

Forward::

    X[k] = c_k * sum_n x[n] * cos(pi * (2n + 1) * k / (2N)),
    c_0 = sqrt(1/N), c_k = sqrt(2/N) for k >= 1

With this scaling the transform matrix is orthogonal, so the inverse is its
transpose and the adjoint of "inverse transform, then keep some samples" is
"zero-fill, then forward transform".

The fast path delegates to ``scipy.fft`` (O(N log N)); ``dct_matrix`` is the
direct definition and is used by the tests as the reference.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np
import scipy.fft

__all__ = [
    "dct_matrix",
    "dct_direct",
    "idct_direct",
    "dct_forward",
    "idct",
    "idct_sampled_adjoint",
]


@lru_cache(maxsize=32)
def _dct_matrix_cached(n: int) -> np.ndarray:
    k = np.arange(n)[:, None]
    j = np.arange(n)[None, :]
    mat = np.cos(np.pi * (2 * j + 1) * k / (2 * n))
    mat[0] *= np.sqrt(1.0 / n)
    mat[1:] *= np.sqrt(2.0 / n)
    mat.setflags(write=False)
    return mat


def dct_matrix(n: int) -> np.ndarray:
    """Orthonormal DCT-II matrix ``D`` with ``X = D @ x`` (read-only)."""
    if n < 1:
        raise ValueError("transform length must be >= 1")
    return _dct_matrix_cached(int(n))


def _as_signal(x) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 0 or arr.shape[-1] == 0:
        raise ValueError("empty input")
    return arr


def dct_direct(x) -> np.ndarray:
    """O(N^2) evaluation of the forward transform by summation."""
    arr = _as_signal(x)
    return arr @ dct_matrix(arr.shape[-1]).T


def idct_direct(coeffs) -> np.ndarray:
    """O(N^2) evaluation of the inverse transform by summation."""
    arr = _as_signal(coeffs)
    return arr @ dct_matrix(arr.shape[-1])


def dct_forward(signal) -> np.ndarray:
    """Orthonormal DCT-II of ``signal`` along its last axis."""
    arr = _as_signal(signal)
    return scipy.fft.dct(arr, type=2, norm="ortho", axis=-1)


def idct(coeffs) -> np.ndarray:
    """Orthonormal DCT-III (exact inverse of :func:`dct_forward`)."""
    arr = _as_signal(coeffs)
    return scipy.fft.idct(arr, type=2, norm="ortho", axis=-1)


def idct_sampled_adjoint(residual, indices, n_total: int) -> np.ndarray:
    """Apply ``A^T S^T`` to ``residual``.

    ``A`` is the orthonormal inverse-DCT matrix and ``S`` keeps the rows in
    ``indices``. Works on ``(..., M)`` arrays and returns ``(..., n_total)``.
    """
    res = np.asarray(residual, dtype=np.float64)
    idx = np.asarray(indices, dtype=np.intp)
    if res.shape[-1] != idx.shape[0]:
        raise ValueError(
            f"residual length {res.shape[-1]} does not match {idx.shape[0]} indices"
        )
    if idx.size and (idx.min() < 0 or idx.max() >= n_total):
        raise IndexError(f"sample index out of range for n_total={n_total}")
    full = np.zeros(res.shape[:-1] + (int(n_total),))
    full[..., idx] = res
    return dct_forward(full)
