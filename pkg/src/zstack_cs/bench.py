"""Fraction sweep benchmark: mask, subsample, reconstruct, score, repeat.

For every fraction and repeat one mask is drawn (seed = base seed + repeat)
and shared by all methods. ``cs`` and ``cs_noclamp`` come from the same
solve and differ only in whether the measured slices are copied back in.
The CSV is the artifact of record; the SVG is rendered from its rows.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass
from html import escape

import numpy as np

from .metrics import psnr3d, ssim3d
from .model import Strategy, VolumeStack
from .optimizer import SolverOptions
from .reconstruct import DEFAULT_C, Method, reconstruct_volume
from .sampling import apply_mask, generate_mask
from .stack_io import ReconstructionReport

__all__ = [
    "BENCH_METHODS",
    "DEFAULT_FRACTIONS",
    "DEFAULT_REPEATS",
    "Summary",
    "run_benchmark",
    "summarize",
    "render_svg",
    "format_summary",
]

log = logging.getLogger(__name__)

BENCH_METHODS = ("cs", "cs_noclamp", "cubic", "linear")
DEFAULT_FRACTIONS = (0.05, 0.1, 0.15, 0.2, 0.3, 0.4, 0.5, 0.7, 0.9)
DEFAULT_REPEATS = 20


def run_benchmark(
    stack: VolumeStack,
    fractions=DEFAULT_FRACTIONS,
    repeats: int = DEFAULT_REPEATS,
    methods=("cs", "cubic"),
    seed: int = 0,
    *,
    reference: VolumeStack | None = None,
    c: float = DEFAULT_C,
    opts: SolverOptions | None = None,
    workers: int = 1,
    strategy: Strategy | str = Strategy.RANDOM_WITH_ENDPOINTS,
    ssim_mode: str = "slice",
    record_runtime: bool = True,
) -> list[ReconstructionReport]:
    """Score every (method, fraction, repeat) cell against ``reference``.

    ``reference`` defaults to ``stack`` itself. With ``record_runtime=False``
    the runtime column is left empty, which makes the rows a pure function
    of the inputs.
    """
    unknown = [m for m in methods if m not in BENCH_METHODS]
    if unknown:
        raise ValueError(f"unknown methods {unknown}; choose from {BENCH_METHODS}")
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    for f in fractions:
        if not 0.0 < f <= 1.0:
            raise ValueError(f"fraction {f} outside (0, 1]")
    reference = stack if reference is None else reference
    if reference.shape != stack.shape:
        raise ValueError("reference and input stacks differ in shape")

    rows: list[ReconstructionReport] = []
    want_cs = any(m.startswith("cs") for m in methods)
    for fraction in fractions:
        for rep in range(repeats):
            mask_seed = seed + rep
            mask = generate_mask(stack.depth, fraction, mask_seed, strategy)
            sub, _ = apply_mask(stack, mask)
            outputs: dict[str, tuple[VolumeStack, float, int]] = {}
            if want_cs:
                t0 = time.perf_counter()
                raw, stats = reconstruct_volume(
                    sub, mask, Method.CS, c=c, opts=opts, clamp_known=False,
                    workers=workers, progress_interval=None,
                )
                ms = 1000.0 * (time.perf_counter() - t0)
                clamped = raw.data.copy()
                clamped[mask.indices] = sub.data
                outputs["cs_noclamp"] = (raw, ms, stats.solver_failures)
                outputs["cs"] = (VolumeStack(clamped, raw.max_value), ms, stats.solver_failures)
            for name in ("cubic", "linear"):
                if name in methods:
                    t0 = time.perf_counter()
                    vol, stats = reconstruct_volume(sub, mask, name, progress_interval=None)
                    outputs[name] = (vol, 1000.0 * (time.perf_counter() - t0), 0)
            for name in methods:
                vol, ms, failures = outputs[name]
                rows.append(
                    ReconstructionReport(
                        method=name,
                        fraction=float(fraction),
                        repeat=rep,
                        seed=mask_seed,
                        psnr3d_db=psnr3d(vol, reference),
                        ssim3d=ssim3d(vol, reference, mode=ssim_mode),
                        runtime_ms=ms if record_runtime else None,
                        solver_failures=failures,
                    )
                )
            log.info("fraction %.3g repeat %d/%d done", fraction, rep + 1, repeats)
    rows.sort(key=ReconstructionReport.sort_key)
    return rows


@dataclass(frozen=True)
class Summary:
    method: str
    fraction: float
    n: int
    psnr_mean: float
    psnr_std: float
    ssim_mean: float
    ssim_std: float


def _mean_std(values: list[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    if np.isinf(arr).any():
        finite = arr[np.isfinite(arr)]
        return (math.inf, 0.0) if finite.size == 0 else (math.inf, math.nan)
    mean = math.fsum(arr) / arr.size
    var = math.fsum((arr - mean) ** 2) / arr.size
    return mean, math.sqrt(var)


def summarize(rows) -> list[Summary]:
    """Mean and population std per (method, fraction), sorted."""
    groups: dict[tuple[str, float], list[ReconstructionReport]] = {}
    for r in rows:
        groups.setdefault((r.method, r.fraction), []).append(r)
    out = []
    for (method, fraction), grp in sorted(groups.items()):
        pm, ps = _mean_std([r.psnr3d_db for r in grp])
        sm, ss = _mean_std([r.ssim3d for r in grp])
        out.append(Summary(method, fraction, len(grp), pm, ps, sm, ss))
    return out


def format_summary(summaries) -> str:
    lines = [f"{'method':<12}{'fraction':>9}{'n':>5}{'psnr3d_db':>12}{'±':>3}{'std':>8}{'ssim3d':>10}{'±':>3}{'std':>8}"]
    for s in summaries:
        lines.append(
            f"{s.method:<12}{s.fraction:>9.3f}{s.n:>5}{s.psnr_mean:>12.3f}{'':>3}{s.psnr_std:>8.3f}"
            f"{s.ssim_mean:>10.4f}{'':>3}{s.ssim_std:>8.4f}"
        )
    return "\n".join(lines)


# -- SVG ----------------------------------------------------------------------

_COLORS = {"cs": "#1f77b4", "cs_noclamp": "#17becf", "cubic": "#ff7f0e", "linear": "#2ca02c"}
_PANEL_W, _PANEL_H = 420, 300
_MARGIN = dict(left=60, right=15, top=30, bottom=45)


def _nice_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=raw)
    first = math.ceil(lo / step) * step
    ticks = []
    t = first
    while t <= hi + 1e-9 * step:
        ticks.append(round(t, 10))
        t += step
    return ticks


def _panel(summaries, attr: str, label: str, x_off: float) -> list[str]:
    mean_attr, std_attr = f"{attr}_mean", f"{attr}_std"
    finite = [
        (getattr(s, mean_attr), getattr(s, std_attr))
        for s in summaries
        if math.isfinite(getattr(s, mean_attr))
    ]
    if finite:
        lo = min(m - (sd if math.isfinite(sd) else 0.0) for m, sd in finite)
        hi = max(m + (sd if math.isfinite(sd) else 0.0) for m, sd in finite)
    else:
        lo, hi = 0.0, 1.0
    pad = 0.05 * (hi - lo) if hi > lo else 0.5
    lo, hi = lo - pad, hi + pad
    has_inf = any(not math.isfinite(getattr(s, mean_attr)) for s in summaries)
    if has_inf:
        hi += 0.1 * (hi - lo)  # headroom for the "inf" markers

    x0 = x_off + _MARGIN["left"]
    y0 = _MARGIN["top"]
    w = _PANEL_W - _MARGIN["left"] - _MARGIN["right"]
    h = _PANEL_H - _MARGIN["top"] - _MARGIN["bottom"]

    def px(frac: float) -> float:
        return x0 + w * frac

    def py(v: float) -> float:
        v = min(max(v, lo), hi)
        return y0 + h * (1.0 - (v - lo) / (hi - lo))

    out = [
        f'<rect x="{x0:.2f}" y="{y0:.2f}" width="{w:.2f}" height="{h:.2f}" fill="none" stroke="#333"/>',
        f'<text x="{x0 + w / 2:.2f}" y="{y0 - 10:.2f}" text-anchor="middle" font-size="13">{escape(label)} vs % of slices available</text>',
        f'<text x="{x0 + w / 2:.2f}" y="{y0 + h + 35:.2f}" text-anchor="middle" font-size="12">% of slices available</text>',
    ]
    for t in (0, 20, 40, 60, 80, 100):
        out.append(f'<line x1="{px(t / 100):.2f}" y1="{y0 + h:.2f}" x2="{px(t / 100):.2f}" y2="{y0 + h + 4:.2f}" stroke="#333"/>')
        out.append(f'<text x="{px(t / 100):.2f}" y="{y0 + h + 17:.2f}" text-anchor="middle" font-size="11">{t}</text>')
    for t in _nice_ticks(lo, hi):
        out.append(f'<line x1="{x0 - 4:.2f}" y1="{py(t):.2f}" x2="{x0:.2f}" y2="{py(t):.2f}" stroke="#333"/>')
        out.append(f'<text x="{x0 - 7:.2f}" y="{py(t) + 4:.2f}" text-anchor="end" font-size="11">{t:g}</text>')

    methods = sorted({s.method for s in summaries})
    for i, method in enumerate(methods):
        color = _COLORS.get(method, "#7f7f7f")
        pts = sorted((s for s in summaries if s.method == method), key=lambda s: s.fraction)
        coords = [(px(s.fraction), py(getattr(s, mean_attr))) for s in pts]
        if len(coords) > 1:
            path = " ".join(f"{x:.2f},{y:.2f}" for x, y in coords)
            out.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        for s, (x, y) in zip(pts, coords):
            mean = getattr(s, mean_attr)
            sd = getattr(s, std_attr)
            if math.isfinite(mean):
                if math.isfinite(sd) and sd > 0:
                    out.append(
                        f'<line x1="{x:.2f}" y1="{py(mean - sd):.2f}" x2="{x:.2f}" y2="{py(mean + sd):.2f}" stroke="{color}"/>'
                    )
                out.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="2.5" fill="{color}"/>')
            else:
                out.append(f'<text x="{x:.2f}" y="{y + 4:.2f}" text-anchor="middle" font-size="11" fill="{color}">inf</text>')
        ly = y0 + 14 + 15 * i
        out.append(f'<line x1="{x0 + 8:.2f}" y1="{ly - 4:.2f}" x2="{x0 + 26:.2f}" y2="{ly - 4:.2f}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{x0 + 30:.2f}" y="{ly:.2f}" font-size="11">{escape(method)}</text>')
    return out


def render_svg(rows) -> str:
    """Two panels (mean PSNR3D, mean SSIM3D vs fraction) with +-1 std bars."""
    summaries = summarize(rows)
    width = 2 * _PANEL_W
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{_PANEL_H}" viewBox="0 0 {width} {_PANEL_H}" font-family="sans-serif">',
        f'<rect width="{width}" height="{_PANEL_H}" fill="white"/>',
    ]
    parts += _panel(summaries, "psnr", "PSNR3D (dB)", 0.0)
    parts += _panel(summaries, "ssim", "SSIM3D", float(_PANEL_W))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
