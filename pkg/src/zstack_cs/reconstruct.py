"""Volume reconstruction: one independent z-trace problem per (y, x) pixel."""
from __future__ import annotations

import enum
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .baselines import cubic_spline_rows, linear_rows
from .bpdn import reconstruct_traces
from .model import SamplingMask, VolumeStack
from .optimizer import SolverOptions, Termination

__all__ = [
    "Method",
    "ReconstructionError",
    "RunStats",
    "reconstruct_volume",
    "DEFAULT_C",
    "C_INTENSITY_SCALE",
]

log = logging.getLogger(__name__)

DEFAULT_C = 4.0
# C is quoted on an 8-bit intensity scale; traces are solved on [0, 1], so the
# weight handed to the solver is c / C_INTENSITY_SCALE
C_INTENSITY_SCALE = 255.0


class Method(str, enum.Enum):
    CS = "cs"
    LINEAR = "linear"
    CUBIC = "cubic"


class ReconstructionError(RuntimeError):
    pass


@dataclass
class RunStats:
    method: str
    n_pixels: int
    solver_failures: int = 0
    iterations_total: int = 0
    wall_time_s: float = 0.0
    clipped_voxels: int = 0
    terminations: dict[str, int] = field(default_factory=dict)


def _solve_block(vals, idx, n_total, method, c_norm, opts, workers, max_value):
    """Reconstruct a block of traces; ``vals`` is ``(B, M)`` in stack units."""
    if method is Method.LINEAR:
        return linear_rows(vals, idx, n_total), None
    if method is Method.CUBIC:
        return cubic_spline_rows(vals, idx, n_total), None
    profiles, res = reconstruct_traces(vals / max_value, idx, n_total, c_norm, opts, workers=workers)
    profiles *= max_value
    return profiles, res


def reconstruct_volume(
    sub: VolumeStack,
    mask: SamplingMask,
    method: Method | str = Method.CS,
    *,
    c: float = DEFAULT_C,
    opts: SolverOptions | None = None,
    clamp_known: bool = True,
    workers: int = 1,
    block_pixels: int = 4096,
    progress_interval: float | None = 10.0,
) -> tuple[VolumeStack, RunStats]:
    """Rebuild the full ``mask.n_slices``-deep stack from its sampled slices.

    ``c`` is the L1 weight on the 8-bit intensity scale (see
    ``C_INTENSITY_SCALE``); it only matters for ``method="cs"``. CS pixels
    whose solve does not converge are replaced by the cubic-spline profile and
    counted in ``RunStats.solver_failures``. With ``clamp_known`` the sampled
    slices are copied into the output unchanged. The result is finally
    clipped to ``[0, max_value]``.
    """
    method = Method(method)
    if sub.data.ndim != 3:
        raise ValueError("sub must be a 3D stack")
    if sub.depth != mask.m:
        raise ValueError(f"stack has {sub.depth} slices but the mask keeps {mask.m}")
    if not (c >= 0 and np.isfinite(c)):
        raise ValueError("c must be finite and >= 0")
    opts = opts or SolverOptions()
    n_total = mask.n_slices
    idx = mask.indices
    _, height, width = sub.shape
    n_pix = height * width
    max_value = sub.max_value
    c_norm = c / C_INTENSITY_SCALE

    traces = sub.data.reshape(mask.m, n_pix).T  # (pixels, M), view
    out = np.empty((n_pix, n_total))
    stats = RunStats(method=method.value, n_pixels=n_pix)
    counts = {t.value: 0 for t in Termination}
    t0 = time.perf_counter()
    last_report = t0

    for lo in range(0, n_pix, block_pixels):
        hi = min(lo + block_pixels, n_pix)
        vals = np.ascontiguousarray(traces[lo:hi])
        profiles, res = _solve_block(vals, idx, n_total, method, c_norm, opts, workers, max_value)
        if res is not None:
            failed = ~res.converged
            if failed.any():
                profiles[failed] = cubic_spline_rows(vals[failed], idx, n_total)
                stats.solver_failures += int(failed.sum())
            stats.iterations_total += int(res.iterations.sum())
            for k, v in res.counts().items():
                counts[k] += v
        out[lo:hi] = profiles
        now = time.perf_counter()
        if progress_interval is not None and now - last_report >= progress_interval and hi < n_pix:
            log.info("%s: %d/%d pixels (%.0f%%), %.1fs", method.value, hi, n_pix, 100.0 * hi / n_pix, now - t0)
            last_report = now

    if method is Method.CS:
        stats.terminations = counts
        if stats.solver_failures == n_pix:
            raise ReconstructionError("the solver failed on every pixel")

    if clamp_known:
        out[:, idx] = traces
    clipped = (out < 0.0) | (out > max_value)
    stats.clipped_voxels = int(clipped.sum())
    np.clip(out, 0.0, max_value, out=out)
    stats.wall_time_s = time.perf_counter() - t0

    volume = np.ascontiguousarray(out.T).reshape(n_total, height, width)
    return VolumeStack(volume, max_value), stats
