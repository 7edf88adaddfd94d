"""Basis-pursuit denoising of z-traces in the DCT domain.

For a trace sampled at z-indices ``idx`` with values ``b`` we look for DCT
coefficients ``X`` (length N) minimizing::

    sum_m (idct(X)[idx[m]] - b[m])**2  +  c * sum_k |X[k]|

and return ``idct(X)``, the full-length profile. The squared-error term is
the smooth part handed to OWL-QN; the L1 term goes in as ``l1_weight``.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .model import PixelTrace
from .optimizer import BatchResult, SolverOptions, minimize_least_squares
from .transform import dct_forward, dct_matrix, idct

__all__ = [
    "BpdnProblem",
    "smooth_value_and_gradient",
    "batch_objective",
    "sampled_idct_matrix",
    "composite_objective",
    "reconstruct_trace",
    "reconstruct_traces",
]


@dataclass(frozen=True)
class BpdnProblem:
    trace: PixelTrace
    c: float

    def __post_init__(self):
        if not (self.c >= 0 and np.isfinite(self.c)):
            raise ValueError("L1 weight c must be finite and >= 0")

    @property
    def n_total(self) -> int:
        return self.trace.n_total


def _residual_and_grad(x: np.ndarray, b: np.ndarray, idx: np.ndarray):
    profile = idct(x)
    resid = profile[..., idx] - b
    full = np.zeros_like(profile)
    full[..., idx] = resid
    grad = 2.0 * dct_forward(full)
    return (resid * resid).sum(axis=-1), grad


def smooth_value_and_gradient(x, problem: BpdnProblem) -> tuple[float, np.ndarray]:
    """Squared misfit at the sampled slices and its gradient in ``x``."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (problem.n_total,):
        raise ValueError(f"coefficient vector has shape {x.shape}, expected ({problem.n_total},)")
    value, grad = _residual_and_grad(x, problem.trace.values, problem.trace.indices)
    return float(value), grad


def batch_objective(values: np.ndarray, indices: np.ndarray):
    """Row-wise smooth objective for :func:`minimize_batch`.

    ``values`` is ``(B, M)``: one sampled trace per row, all sharing ``indices``.
    """
    values = np.asarray(values, dtype=np.float64)
    idx = np.asarray(indices, dtype=np.intp)

    def fun(x: np.ndarray, rows: np.ndarray):
        return _residual_and_grad(x, values[rows], idx)

    return fun


def sampled_idct_matrix(indices, n_total: int) -> np.ndarray:
    """Rows ``indices`` of the orthonormal inverse-DCT matrix, shape ``(M, N)``."""
    idx = np.asarray(indices, dtype=np.intp)
    return np.ascontiguousarray(dct_matrix(int(n_total)).T[idx])


def composite_objective(x, problem: BpdnProblem) -> float:
    """Full objective value, misfit plus ``c * ||x||_1``."""
    value, _ = smooth_value_and_gradient(x, problem)
    return value + problem.c * float(np.abs(x).sum())


def reconstruct_traces(
    values,
    indices,
    n_total: int,
    c: float,
    opts: SolverOptions | None = None,
    *,
    workers: int = 1,
) -> tuple[np.ndarray, BatchResult]:
    """Solve one BPDN problem per row of ``values`` (shape ``(B, M)``).

    Returns the ``(B, n_total)`` reconstructed profiles and the raw solver
    result (coefficients, objective, termination reason per row). Starts
    from all-zero coefficients.
    """
    values = np.array(values, dtype=np.float64, ndmin=2)
    idx = np.asarray(indices, dtype=np.intp)
    if values.shape[1] != idx.shape[0]:
        raise ValueError("each row of values must have one entry per index")
    if idx.shape[0] < 2:
        raise ValueError("at least two samples are required")
    if not (c >= 0 and np.isfinite(c)):
        raise ValueError("L1 weight c must be finite and >= 0")
    opts = replace(opts or SolverOptions(), l1_weight=float(c))
    A = sampled_idct_matrix(idx, n_total)
    result = minimize_least_squares(A, values, opts, workers=workers)
    return idct(result.solution), result


def reconstruct_trace(trace: PixelTrace, c: float, opts: SolverOptions | None = None) -> np.ndarray:
    """Full-length profile recovered from one sampled trace."""
    profile, _ = reconstruct_traces(trace.values[None, :], trace.indices, trace.n_total, c, opts)
    return profile[0]
