"""Shared domain types: volumes, sampling masks and per-pixel traces."""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Strategy",
    "VolumeStack",
    "SamplingMask",
    "PixelTrace",
    "ValidationResult",
    "validate_stack",
    "InvalidStackError",
]


class Strategy(str, enum.Enum):
    RANDOM_WITH_ENDPOINTS = "RandomWithEndpoints"
    STRATIFIED = "Stratified"


class InvalidStackError(ValueError):
    pass


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class VolumeStack:
    """A z-stack of shape ``(depth, height, width)`` stored as float64.

    ``max_value`` is the dynamic-range ceiling (255, 65535, 1.0, ...) and is
    what PSNR is computed against. The array is copied and made read-only.
    Construction does not enforce the value-range invariants; call
    :func:`validate_stack` (or :meth:`check`) for that.
    """

    data: np.ndarray
    max_value: float = 1.0

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float64, copy=True)
        object.__setattr__(self, "data", _readonly(arr))
        object.__setattr__(self, "max_value", float(self.max_value))

    @classmethod
    def from_flat(cls, values, depth: int, height: int, width: int, max_value: float):
        flat = np.asarray(values, dtype=np.float64).ravel()
        if flat.size != depth * height * width:
            raise InvalidStackError(
                f"data length {flat.size} != depth*height*width = {depth * height * width}"
            )
        return cls(flat.reshape(depth, height, width), max_value)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def depth(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    def check(self) -> "VolumeStack":
        """Raise :class:`InvalidStackError` listing every violated invariant."""
        result = validate_stack(self)
        if not result.ok:
            raise InvalidStackError("; ".join(result.violations))
        return self

    def with_data(self, data) -> "VolumeStack":
        return VolumeStack(data, self.max_value)


@dataclass(frozen=True)
class ValidationResult:
    violations: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def validate_stack(stack: VolumeStack) -> ValidationResult:
    """Report every violated VolumeStack invariant; never raises."""
    problems: list[str] = []
    data = stack.data
    if data.ndim != 3:
        problems.append(f"shape mismatch: expected 3 axes (z, y, x), got {data.ndim}")
        return ValidationResult(tuple(problems))
    if data.shape[0] < 2:
        problems.append("depth >= 2 required")
    if data.shape[1] < 1 or data.shape[2] < 1:
        problems.append("height and width must be >= 1")
    mv = stack.max_value
    if not (np.isfinite(mv) and mv > 0):
        problems.append(f"max_value must be finite and > 0, got {mv}")
    finite = np.isfinite(data)
    if not finite.all():
        z, y, x = (int(v) for v in np.argwhere(~finite)[0])
        n_bad = int((~finite).sum())
        problems.append(f"non-finite value at ({z},{y},{x})" + (f" and {n_bad - 1} more" if n_bad > 1 else ""))
    vals = np.where(finite, data, 0.0)
    if (vals < 0).any():
        z, y, x = (int(v) for v in np.argwhere(vals < 0)[0])
        problems.append(f"value below 0 at ({z},{y},{x})")
    if np.isfinite(mv) and (vals > mv).any():
        z, y, x = (int(v) for v in np.argwhere(vals > mv)[0])
        problems.append(f"value above max_value={mv:g} at ({z},{y},{x})")
    return ValidationResult(tuple(problems))


@dataclass(frozen=True)
class SamplingMask:
    """Retained z-indices out of ``n_slices``; endpoints always included."""

    n_slices: int
    kept: tuple[int, ...]
    seed: int = 0
    strategy: Strategy = Strategy.RANDOM_WITH_ENDPOINTS
    fraction: float | None = None

    def __post_init__(self):
        kept = tuple(int(k) for k in self.kept)
        object.__setattr__(self, "kept", kept)
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        n = self.n_slices
        m = len(kept)
        if n < 2:
            raise ValueError("n_slices must be >= 2")
        if not 2 <= m <= n:
            raise ValueError(f"mask must keep between 2 and {n} slices, got {m}")
        if any(b <= a for a, b in zip(kept, kept[1:])):
            raise ValueError("kept indices must be strictly increasing")
        if kept[0] != 0 or kept[-1] != n - 1:
            raise ValueError(f"mask must keep both endpoints 0 and {n - 1}")
        if self.fraction is None:
            object.__setattr__(self, "fraction", m / n)

    @property
    def m(self) -> int:
        return len(self.kept)

    @property
    def indices(self) -> np.ndarray:
        return np.asarray(self.kept, dtype=np.intp)

    @classmethod
    def full(cls, n_slices: int, seed: int = 0) -> "SamplingMask":
        return cls(n_slices, tuple(range(n_slices)), seed, Strategy.RANDOM_WITH_ENDPOINTS, 1.0)


@dataclass(frozen=True, eq=False)
class PixelTrace:
    """Intensities ``values[m]`` measured at z = ``indices[m]`` of ``n_total``."""

    values: np.ndarray
    indices: np.ndarray
    n_total: int

    def __post_init__(self):
        vals = _readonly(np.array(self.values, dtype=np.float64, ndmin=1))
        idx = _readonly(np.array(self.indices, dtype=np.intp, ndmin=1))
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "indices", idx)
        if vals.ndim != 1 or vals.shape != idx.shape:
            raise ValueError("values and indices must be 1D and of equal length")
        if idx.size and (idx.min() < 0 or idx.max() >= self.n_total):
            raise IndexError(f"trace index out of range for n_total={self.n_total}")
        if np.any(np.diff(idx) <= 0):
            raise ValueError("trace indices must be strictly increasing")

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @classmethod
    def from_mask(cls, values, mask: SamplingMask) -> "PixelTrace":
        return cls(values, mask.indices, mask.n_slices)
