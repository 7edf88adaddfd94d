"""Reading and writing stacks, masks and metric tables.

Formats:

* raw: little-endian float64 voxels in (z, y, x) order, plus a JSON sidecar
  at ``path + ".json"`` with ``depth``, ``height``, ``width``, ``max_value``.
  Lossless; the canonical interchange format.
* TIFF: grayscale 8- or 16-bit multi-page files, one page per z-slice,
  uncompressed or deflate. Writing quantizes to integers.
* mask JSON and the benchmark metrics CSV.
"""
from __future__ import annotations

import csv
import enum
import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import tifffile

from .model import SamplingMask, Strategy, VolumeStack

__all__ = [
    "StackFormat",
    "StackFormatError",
    "QuantizationWarning",
    "ReconstructionReport",
    "METRICS_HEADER",
    "guess_format",
    "read_stack",
    "write_stack",
    "read_mask",
    "write_mask",
    "write_metrics_csv",
    "read_metrics_csv",
]

METRICS_HEADER = (
    "method",
    "fraction",
    "repeat",
    "seed",
    "psnr3d_db",
    "ssim3d",
    "runtime_ms",
    "solver_failures",
)
_MASK_KEYS = ("n_slices", "kept", "seed", "strategy", "fraction")
_SIDECAR_KEYS = ("depth", "height", "width", "max_value")


class StackFormat(str, enum.Enum):
    TIFF = "tiff"
    RAW = "raw"


class StackFormatError(ValueError):
    pass


class QuantizationWarning(UserWarning):
    pass


def guess_format(path) -> StackFormat:
    suffix = Path(path).suffix.lower()
    return StackFormat.TIFF if suffix in (".tif", ".tiff") else StackFormat.RAW


def _sidecar(path: Path) -> Path:
    return path.with_name(path.name + ".json")


# -- stacks -----------------------------------------------------------------

def _read_raw(path: Path) -> VolumeStack:
    side = _sidecar(path)
    if not side.exists():
        raise StackFormatError(f"missing sidecar {side}")
    try:
        meta = json.loads(side.read_text())
        depth, height, width = (int(meta[k]) for k in ("depth", "height", "width"))
        max_value = float(meta["max_value"])
    except (KeyError, TypeError, ValueError) as exc:
        raise StackFormatError(f"inconsistent sidecar {side}: {exc}") from exc
    data = np.fromfile(path, dtype="<f8")
    expected = depth * height * width
    if data.size != expected:
        raise StackFormatError(
            f"{path} holds {data.size} values, sidecar says {depth}x{height}x{width} = {expected}"
        )
    return VolumeStack(data.reshape(depth, height, width).astype(np.float64), max_value)


def _write_raw(stack: VolumeStack, path: Path) -> None:
    np.ascontiguousarray(stack.data, dtype="<f8").tofile(path)
    meta = {
        "depth": stack.depth,
        "height": stack.height,
        "width": stack.width,
        "max_value": stack.max_value,
    }
    _sidecar(path).write_text(json.dumps(meta))


def _read_tiff(path: Path, max_value: float | None) -> VolumeStack:
    with tifffile.TiffFile(path) as tif:
        pages = list(tif.pages)
        if not pages:
            raise StackFormatError(f"{path} contains no pages")
        planes = []
        dtype = None
        for page in pages:
            if page.samplesperpixel != 1:
                raise StackFormatError("unsupported: multi-channel")
            if page.is_tiled:
                raise StackFormatError("unsupported: tiled TIFF")
            if page.compression not in (
                tifffile.COMPRESSION.NONE,
                tifffile.COMPRESSION.ADOBE_DEFLATE,
                tifffile.COMPRESSION.DEFLATE,
            ):
                raise StackFormatError(f"unsupported compression: {page.compression.name}")
            if page.dtype not in (np.dtype(np.uint8), np.dtype(np.uint16)):
                raise StackFormatError(f"unsupported sample type {page.dtype}; need 8- or 16-bit")
            arr = page.asarray()
            if arr.ndim != 2:
                raise StackFormatError("unsupported: multi-channel")
            dtype = arr.dtype
            planes.append(arr)
    data = np.stack(planes).astype(np.float64)
    if max_value is None:
        max_value = float(np.iinfo(dtype).max)
    return VolumeStack(data, max_value)


def _tiff_dtype(max_value: float):
    if max_value <= 255:
        return np.uint8
    if max_value <= 65535:
        return np.uint16
    raise StackFormatError(f"max_value {max_value:g} does not fit a 16-bit TIFF")


def _write_tiff(stack: VolumeStack, path: Path, compress: bool) -> None:
    dtype = _tiff_dtype(stack.max_value)
    data = stack.data
    if not np.array_equal(data, np.round(data)):
        warnings.warn(
            f"non-integer intensities rounded to {np.dtype(dtype).name} for TIFF output",
            QuantizationWarning,
            stacklevel=3,
        )
    hi = np.iinfo(dtype).max
    q = np.clip(np.round(data), 0, hi).astype(dtype)
    tifffile.imwrite(
        path,
        q,
        photometric="minisblack",
        compression="zlib" if compress else None,
        metadata=None,
    )


def read_stack(path, fmt: StackFormat | str | None = None, *, max_value: float | None = None) -> VolumeStack:
    """Load a stack. ``max_value`` overrides the TIFF bit-depth default."""
    path = Path(path)
    fmt = guess_format(path) if fmt is None else StackFormat(fmt)
    if fmt is StackFormat.TIFF:
        return _read_tiff(path, max_value)
    stack = _read_raw(path)
    return stack if max_value is None else VolumeStack(stack.data, max_value)


def write_stack(stack: VolumeStack, path, fmt: StackFormat | str | None = None, *, compress: bool = False) -> None:
    """Write a stack; TIFF output is quantized (warns if that loses data)."""
    path = Path(path)
    fmt = guess_format(path) if fmt is None else StackFormat(fmt)
    if fmt is StackFormat.TIFF:
        _write_tiff(stack, path, compress)
    else:
        _write_raw(stack, path)


# -- masks ------------------------------------------------------------------

def write_mask(mask: SamplingMask, path) -> None:
    obj = {
        "n_slices": mask.n_slices,
        "kept": list(mask.kept),
        "seed": mask.seed,
        "strategy": mask.strategy.value,
        "fraction": mask.fraction,
    }
    Path(path).write_text(json.dumps(obj))


def read_mask(path) -> SamplingMask:
    obj = json.loads(Path(path).read_text())
    if not isinstance(obj, dict) or set(obj) != set(_MASK_KEYS):
        got = sorted(obj) if isinstance(obj, dict) else type(obj).__name__
        raise StackFormatError(f"mask file must have exactly the keys {list(_MASK_KEYS)}, got {got}")
    return SamplingMask(
        n_slices=int(obj["n_slices"]),
        kept=tuple(int(k) for k in obj["kept"]),
        seed=int(obj["seed"]),
        strategy=Strategy(obj["strategy"]),
        fraction=float(obj["fraction"]),
    )


# -- metrics ----------------------------------------------------------------

@dataclass(frozen=True)
class ReconstructionReport:
    method: str
    fraction: float
    repeat: int
    seed: int
    psnr3d_db: float
    ssim3d: float
    runtime_ms: float | None
    solver_failures: int

    def sort_key(self):
        return (self.method, self.fraction, self.repeat)


def _fmt_float(v: float | None) -> str:
    if v is None:
        return ""
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(float(v))


def write_metrics_csv(rows, path) -> None:
    """One line per run, sorted by (method, fraction, repeat).

    An empty ``runtime_ms`` field means timing was not recorded.
    """
    ordered = sorted(rows, key=ReconstructionReport.sort_key)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(METRICS_HEADER)
        for r in ordered:
            writer.writerow(
                [
                    r.method,
                    _fmt_float(r.fraction),
                    r.repeat,
                    r.seed,
                    _fmt_float(r.psnr3d_db),
                    _fmt_float(r.ssim3d),
                    _fmt_float(r.runtime_ms),
                    r.solver_failures,
                ]
            )


def read_metrics_csv(path) -> list[ReconstructionReport]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if tuple(header or ()) != METRICS_HEADER:
            raise StackFormatError(f"unexpected metrics header {header}")
        rows = []
        for rec in reader:
            rows.append(
                ReconstructionReport(
                    method=rec[0],
                    fraction=float(rec[1]),
                    repeat=int(rec[2]),
                    seed=int(rec[3]),
                    psnr3d_db=float(rec[4]),
                    ssim3d=float(rec[5]),
                    runtime_ms=float(rec[6]) if rec[6] else None,
                    solver_failures=int(rec[7]),
                )
            )
    return rows
