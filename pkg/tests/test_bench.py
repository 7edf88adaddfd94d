import math

import pytest

from zstack_cs.bench import format_summary, render_svg, run_benchmark, summarize
from zstack_cs.phantom import generate_phantom, generate_phantom_pair
from zstack_cs.stack_io import ReconstructionReport, read_metrics_csv, write_metrics_csv


@pytest.fixture(scope="module")
def stack():
    return generate_phantom(6, 6, 40, seed=2, max_value=255)


@pytest.mark.parametrize("methods", [("cs",), ("cs_noclamp", "cubic", "linear")])
def test_full_fraction_scores_inf_and_one(stack, methods):
    rows = run_benchmark(stack, [1.0], 2, methods)
    assert len(rows) == 2 * len(methods)
    for s in summarize(rows):
        if s.method == "cs_noclamp":
            # the L1 term shrinks even a fully sampled noisy trace
            assert 30 < s.psnr_mean < math.inf and 0.9 < s.ssim_mean < 1.0
        else:
            assert s.psnr_mean == math.inf and s.ssim_mean == 1.0


def test_rows_are_reproducible(stack):
    a = run_benchmark(stack, [0.3, 0.6], 2, ("cs", "cubic"), seed=4, record_runtime=False)
    b = run_benchmark(stack, [0.3, 0.6], 2, ("cs", "cubic"), seed=4, record_runtime=False)
    assert a == b
    assert [r.seed for r in a if r.method == "cs"] == [4, 5, 4, 5]


def test_methods_share_masks_and_cs_variants_agree_off_mask(stack):
    rows = run_benchmark(stack, [0.5], 1, ("cs", "cs_noclamp"))
    by = {r.method: r for r in rows}
    assert by["cs"].seed == by["cs_noclamp"].seed
    assert by["cs"].runtime_ms == by["cs_noclamp"].runtime_ms


def test_reference_option(stack):
    obs, clean = generate_phantom_pair(6, 6, 40, seed=2, max_value=255)
    vs_obs = run_benchmark(obs, [0.5], 1, ("cubic",))
    vs_clean = run_benchmark(obs, [0.5], 1, ("cubic",), reference=clean)
    assert vs_obs[0].psnr3d_db != vs_clean[0].psnr3d_db
    with pytest.raises(ValueError):
        run_benchmark(obs, [0.5], 1, ("cubic",), reference=generate_phantom(6, 6, 41))


@pytest.mark.parametrize(
    "kwargs",
    [dict(methods=("fancy",)), dict(repeats=0), dict(fractions=[0.0]), dict(fractions=[1.2])],
)
def test_invalid_arguments(stack, kwargs):
    args = dict(fractions=[0.5], repeats=1, methods=("cubic",))
    args.update(kwargs)
    with pytest.raises(ValueError):
        run_benchmark(stack, **args)


def _row(method, fraction, repeat, psnr, ssim=0.5):
    return ReconstructionReport(method, fraction, repeat, repeat, psnr, ssim, None, 0)


def test_summary_uses_population_std():
    rows = [_row("cs", 0.2, 0, 30.0), _row("cs", 0.2, 1, 32.0), _row("cubic", 0.2, 0, 28.0)]
    s = {x.method: x for x in summarize(rows)}
    assert s["cs"].psnr_mean == 31.0 and s["cs"].psnr_std == 1.0 and s["cs"].n == 2
    assert s["cubic"].psnr_std == 0.0
    assert "cubic" in format_summary(summarize(rows))


def test_summary_with_infinite_scores():
    s = summarize([_row("cs", 1.0, 0, math.inf, 1.0), _row("cs", 1.0, 1, math.inf, 1.0)])[0]
    assert s.psnr_mean == math.inf and s.psnr_std == 0.0
    mixed = summarize([_row("cs", 1.0, 0, math.inf), _row("cs", 1.0, 1, 40.0)])[0]
    assert mixed.psnr_mean == math.inf and math.isnan(mixed.psnr_std)


def test_svg_is_a_function_of_the_csv(tmp_path):
    rows = [_row(m, f, r, 20 + 10 * f + r + (m == "cs"), 0.5 + 0.3 * f)
            for m in ("cs", "cubic") for f in (0.1, 0.5, 1.0) for r in range(2)]
    rows.append(_row("linear", 1.0, 0, math.inf, 1.0))
    write_metrics_csv(rows, tmp_path / "m.csv")
    svg = render_svg(read_metrics_csv(tmp_path / "m.csv"))
    assert svg == render_svg(rows)
    assert svg.startswith("<svg") and svg.count("<polyline") == 4
    assert ">inf<" in svg and "% of slices available" in svg
    for method in ("cs", "cubic", "linear"):
        assert f">{method}<" in svg
