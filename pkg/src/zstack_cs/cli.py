"""Command-line front end.

Every subcommand prints its resolved configuration as one JSON line on
stderr. Exit status: 0 on success, 1 on data errors, 2 on usage errors.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bench import BENCH_METHODS, DEFAULT_FRACTIONS, DEFAULT_REPEATS, format_summary, render_svg, run_benchmark, summarize
from .metrics import psnr3d, ssim3d
from .model import InvalidStackError, Strategy, validate_stack
from .optimizer import SolverOptions
from .phantom import PhantomKind, generate_phantom_pair
from .reconstruct import DEFAULT_C, Method, ReconstructionError, reconstruct_volume
from .sampling import apply_mask, generate_mask
from .stack_io import StackFormat, StackFormatError, guess_format, read_mask, read_metrics_csv, read_stack, write_mask, write_metrics_csv, write_stack

log = logging.getLogger("zstack_cs")


class DataError(Exception):
    pass


def _fmt_metric(v: float) -> str:
    return str(round(v, 6))


def _load(path, fmt=None, max_value=None):
    try:
        stack = read_stack(path, fmt, max_value=max_value)
    except FileNotFoundError as exc:
        raise DataError(f"{path}: file not found") from exc
    result = validate_stack(stack)
    if not result.ok:
        raise DataError(f"{path}: invalid stack: " + "; ".join(result.violations))
    return stack


def _solver_opts(args) -> SolverOptions:
    return SolverOptions(memory=args.memory, max_iters=args.max_iters, tol=args.tol)


def cmd_phantom(args) -> int:
    observed, clean = generate_phantom_pair(
        args.width, args.height, args.depth, args.kind, args.seed, args.max_value,
        None if args.snr_db is None or args.snr_db < 0 else args.snr_db,
    )
    for stack, path in ((observed, args.out), (clean, args.clean_out)):
        if path is None:
            continue
        fmt = StackFormat(args.format) if args.format else guess_format(path)
        if fmt is StackFormat.TIFF:
            stack = stack.with_data(np.round(stack.data))  # quantize on purpose, no warning
        write_stack(stack, path, fmt)
    return 0


def cmd_mask(args) -> int:
    n = args.n_slices
    if n is None:
        n = _load(args.stack, args.format).depth
    mask = generate_mask(n, args.fraction, args.seed, args.strategy)
    write_mask(mask, args.out)
    return 0


def cmd_subsample(args) -> int:
    stack = _load(args.stack, args.format, args.max_value)
    mask = read_mask(args.mask)
    sub, _ = apply_mask(stack, mask)
    write_stack(sub, args.out, args.out_format)
    return 0


def cmd_reconstruct(args) -> int:
    sub = _load(args.sub, args.format, args.max_value)
    mask = read_mask(args.mask)
    out, stats = reconstruct_volume(
        sub, mask, args.method, c=args.c, opts=_solver_opts(args),
        clamp_known=not args.no_clamp_known, workers=args.workers,
        progress_interval=args.progress_interval,
    )
    write_stack(out, args.out, args.out_format)
    print(json.dumps({
        "method": stats.method,
        "pixels": stats.n_pixels,
        "solver_failures": stats.solver_failures,
        "iterations_total": stats.iterations_total,
        "clipped_voxels": stats.clipped_voxels,
        "wall_time_s": round(stats.wall_time_s, 3),
    }))
    return 0


def cmd_evaluate(args) -> int:
    recon = _load(args.recon, args.format, args.max_value)
    ref = _load(args.reference, args.format, args.max_value)
    if recon.shape != ref.shape:
        raise DataError(f"shape mismatch: {recon.shape} vs {ref.shape}")
    print(f"psnr3d_db={_fmt_metric(psnr3d(recon, ref))} ssim3d={_fmt_metric(ssim3d(recon, ref, args.ssim_mode))}")
    return 0


def cmd_benchmark(args) -> int:
    stack = _load(args.stack, args.format, args.max_value)
    reference = _load(args.reference, args.format, args.max_value) if args.reference else None
    rows = run_benchmark(
        stack, args.fractions, args.repeats, args.methods, args.seed,
        reference=reference, c=args.c, opts=_solver_opts(args), workers=args.workers,
        strategy=args.strategy, ssim_mode=args.ssim_mode, record_runtime=not args.no_runtime,
    )
    write_metrics_csv(rows, args.out_csv)
    if args.out_svg:
        # plot from the CSV as written so the figure is a function of the file
        Path(args.out_svg).write_text(render_svg(read_metrics_csv(args.out_csv)))
    print(format_summary(summarize(rows)))
    expected = len(args.fractions) * args.repeats * len(args.methods)
    return 0 if len(rows) == expected else 1


def cmd_plot(args) -> int:
    Path(args.out_svg).write_text(render_svg(read_metrics_csv(args.csv)))
    return 0


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _method_list(text: str) -> list[str]:
    items = [v.strip() for v in text.split(",") if v.strip()]
    bad = [v for v in items if v not in BENCH_METHODS]
    if bad or not items:
        raise argparse.ArgumentTypeError(f"methods must be drawn from {','.join(BENCH_METHODS)}")
    return items


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="zstack-cs", description="Compressive-sensing z-stack reconstruction toolkit.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="progress and debug logging on stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True):
        sp.add_argument("--format", choices=["tiff", "raw"], default=None,
                        help="input format (default: from the file extension)")
        sp.add_argument("--max-value", type=float, default=None,
                        help="override the dynamic-range ceiling of input stacks")
        if seed:
            sp.add_argument("--seed", type=int, default=0)

    def solver(sp):
        sp.add_argument("--c", type=float, default=DEFAULT_C,
                        help="L1 weight on the 8-bit intensity scale (default %(default)s)")
        sp.add_argument("--workers", type=int, default=1)
        sp.add_argument("--memory", type=int, default=10)
        sp.add_argument("--max-iters", type=int, default=500)
        sp.add_argument("--tol", type=float, default=1e-6)

    sp = sub.add_parser("phantom", help="generate a synthetic ground-truth stack")
    sp.add_argument("--width", type=int, default=64)
    sp.add_argument("--height", type=int, default=64)
    sp.add_argument("--depth", type=int, default=301)
    sp.add_argument("--kind", choices=[k.value for k in PhantomKind], default=PhantomKind.GAUSSIAN_BLOBS.value)
    sp.add_argument("--max-value", type=float, default=255.0)
    sp.add_argument("--snr-db", type=float, default=30.0, help="noise level; negative disables noise")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--format", choices=["tiff", "raw"], default=None)
    sp.add_argument("--out", required=True)
    sp.add_argument("--clean-out", default=None, help="also write the noiseless volume")
    sp.set_defaults(func=cmd_phantom)

    sp = sub.add_parser("mask", help="draw a random slice mask")
    src = sp.add_mutually_exclusive_group(required=True)
    src.add_argument("--n-slices", type=int)
    src.add_argument("--stack", help="take the slice count from this stack")
    sp.add_argument("--fraction", type=float, required=True)
    sp.add_argument("--strategy", choices=[s.value for s in Strategy], default=Strategy.RANDOM_WITH_ENDPOINTS.value)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--format", choices=["tiff", "raw"], default=None)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_mask)

    sp = sub.add_parser("subsample", help="keep only the masked slices of a stack")
    common(sp)
    sp.add_argument("--stack", required=True)
    sp.add_argument("--mask", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--out-format", choices=["tiff", "raw"], default=None)
    sp.set_defaults(func=cmd_subsample)

    sp = sub.add_parser("reconstruct", help="rebuild the full stack from sampled slices")
    common(sp)
    solver(sp)
    sp.add_argument("--sub", required=True, help="subsampled stack (one slice per kept index)")
    sp.add_argument("--mask", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--out-format", choices=["tiff", "raw"], default=None)
    sp.add_argument("--method", choices=[m.value for m in Method], default=Method.CS.value)
    sp.add_argument("--no-clamp-known", action="store_true",
                    help="keep the solver output at sampled slices instead of the measurements")
    sp.add_argument("--progress-interval", type=float, default=10.0, help="seconds between progress lines")
    sp.set_defaults(func=cmd_reconstruct)

    sp = sub.add_parser("evaluate", help="PSNR3D and SSIM3D of a reconstruction")
    common(sp)
    sp.add_argument("--recon", required=True)
    sp.add_argument("--reference", required=True)
    sp.add_argument("--ssim-mode", choices=["slice", "3d"], default="slice")
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("benchmark", help="sweep fractions and repeats, write CSV and SVG")
    common(sp)
    solver(sp)
    sp.add_argument("--stack", required=True)
    sp.add_argument("--reference", default=None, help="ground truth to score against (default: --stack)")
    sp.add_argument("--fractions", type=_float_list, default=list(DEFAULT_FRACTIONS))
    sp.add_argument("--repeats", type=int, default=DEFAULT_REPEATS)
    sp.add_argument("--methods", type=_method_list, default=["cs", "cs_noclamp", "cubic", "linear"])
    sp.add_argument("--strategy", choices=[s.value for s in Strategy], default=Strategy.RANDOM_WITH_ENDPOINTS.value)
    sp.add_argument("--ssim-mode", choices=["slice", "3d"], default="slice")
    sp.add_argument("--no-runtime", action="store_true",
                    help="leave runtime_ms empty so reruns produce byte-identical CSVs")
    sp.add_argument("--out-csv", required=True)
    sp.add_argument("--out-svg", default=None)
    sp.set_defaults(func=cmd_benchmark)

    sp = sub.add_parser("plot", help="render the SVG chart from a benchmark CSV")
    sp.add_argument("--csv", required=True)
    sp.add_argument("--out-svg", required=True)
    sp.set_defaults(func=cmd_plot)
    return p


def _resolved(args) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k != "func"}
    return json.loads(json.dumps(cfg, default=str))


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose or args.command in ("reconstruct", "benchmark") else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    print(json.dumps(_resolved(args), sort_keys=True), file=sys.stderr)
    try:
        return args.func(args)
    except (DataError, InvalidStackError, StackFormatError, ReconstructionError, ValueError, IndexError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
