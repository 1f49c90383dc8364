"""Command-line surface.

Exit codes: 0 success, 1 data error, 2 usage error.
"""

from __future__ import annotations

import sys
import time
from pathlib import Path

import click
import numpy as np
import yaml

from . import formats, synth
from .bayesopt import SearchSpec, optimize
from .cdkf import CdkfConfig, NoiseMode
from .errors import AreatrackError
from .geometry import BBox, CameraIntrinsics, DepthMap
from .mbtp import estimate_area
from .metrics import evaluate_detections_per_frame
from .pipeline import PipelineConfig, report_from_records, run_pipeline, smooth_records


@click.group()
def main():
    """Tracked, depth-based pothole area estimation toolkit."""


def _fail(msg: str) -> "NoReturn":  # noqa: F821 - typing only
    click.echo(f"error: {msg}", err=True)
    sys.exit(1)


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--no-smoothing", is_flag=True, default=False)
@click.option("--lam", type=float, default=1.0, help="confidence weight of the noise model")
@click.option("--theta", type=float, default=1.0, help="distance weight of the noise model")
@click.option("--mode", type=click.Choice([m.value for m in NoiseMode]), default="combined")
@click.option("--seed", type=int, default=0)
@click.option("--out", "out_path", type=click.Path(), default=None)
def estimate(manifest_path, no_smoothing, lam, theta, mode, seed, out_path):
    """Run the full pipeline on a sequence; emit per-frame result records."""
    try:
        manifest = formats.SequenceManifest.load(manifest_path)
        config = PipelineConfig(
            cdkf=CdkfConfig(lam=lam, theta=theta, mode=NoiseMode(mode)),
            smoothing=not no_smoothing,
            seed=seed,
        )
        records, _ = run_pipeline(manifest, config)
    except AreatrackError as e:
        _fail(str(e))
    text = formats.write_results(records)
    if out_path:
        Path(out_path).write_text(text)
    else:
        click.echo(text, nl=False)


@main.command("eval-area")
@click.option("--results", "results_path", required=True, type=click.Path(exists=True))
@click.option("--min-track-len", type=int, default=5)
@click.option("--raw", is_flag=True, default=False, help="score raw instead of smoothed areas")
def eval_area(results_path, min_track_len, raw):
    """Area-consistency report (per-track MAE/CV/AFD/NIS averages)."""
    try:
        records = formats.parse_results(Path(results_path).read_text())
    except AreatrackError as e:
        _fail(str(e))
    report = report_from_records(records, min_track_len=min_track_len, smoothed=not raw)
    click.echo(f"# per-track averages over {report.track_count} tracks "
               f"(min length {report.min_track_len}, potholes only)")
    click.echo(f"mae={report.mae:.6f} cv={report.cv:.6f} afd={report.afd:.6f} "
               f"nis_mean={report.nis_mean:.6f} objective_j={report.objective:.6f}")
    for t in report.per_track:
        nis = f"{t.nis_mean:.6f}" if t.nis_mean is not None else "n/a"
        click.echo(f"track={t.track_id} n={t.n} mean_area={t.mean_area:.6f} "
                   f"mae={t.mae:.6f} cv={t.cv:.6f} afd={t.afd:.6f} nis={nis}")


@main.command("eval-det")
@click.option("--dets", "dets_path", required=True, type=click.Path(exists=True))
@click.option("--gt", "gt_path", required=True, type=click.Path(exists=True))
@click.option("--iou", "iou_thresh", type=float, default=0.7)
def eval_det(dets_path, gt_path, iou_thresh):
    """Detection metrics (P/R/F1, AP50, AP50-95) for potholes."""
    try:
        dets = formats.parse_detections(Path(dets_path).read_text())
        gts = formats.parse_detections(Path(gt_path).read_text())
    except AreatrackError as e:
        _fail(str(e))
    dets = {f: [d for d in ds if d.class_id == 0] for f, ds in dets.items()}
    gt_boxes = {f: [g.bbox for g in gs if g.class_id == 0] for f, gs in gts.items()}
    rep = evaluate_detections_per_frame(dets, gt_boxes, iou_thresh)
    click.echo(f"tp={rep.tp} fp={rep.fp} fn={rep.fn} iou_thresh={rep.iou_thresh:g}")
    click.echo(f"precision={rep.precision:.4f} recall={rep.recall:.4f} f1={rep.f1:.4f}")
    click.echo(f"ap50={rep.ap50:.4f} ap50_95={rep.ap50_95:.4f}")


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--mode", type=click.Choice([m.value for m in NoiseMode]), default="combined")
@click.option("--seed", type=int, default=0)
@click.option("--n-init", type=int, default=5)
@click.option("--n-iter", type=int, default=30)
@click.option("--min-track-len", type=int, default=5)
def optimize_cmd(manifest_path, mode, seed, n_init, n_iter, min_track_len):
    """Tune the noise weights (lambda, theta) by minimizing objective J."""
    try:
        manifest = formats.SequenceManifest.load(manifest_path)
        base = PipelineConfig(smoothing=False, seed=seed)
        records, _ = run_pipeline(manifest, base)
    except AreatrackError as e:
        _fail(str(e))
    if not records:
        _fail("no tracked detections in sequence; nothing to optimize")

    def objective(point) -> float:
        lam, theta = point
        cfg = CdkfConfig(lam=max(lam, 1e-6), theta=max(theta, 1e-6), mode=NoiseMode(mode))
        smoothed = smooth_records(records, cfg)
        rep = report_from_records(smoothed, min_track_len=min_track_len)
        return rep.objective

    result = optimize(objective, SearchSpec(n_init=n_init, n_iter=n_iter, seed=seed))
    lam, theta = result.best_point
    click.echo(f"lambda={lam:.6f} theta={theta:.6f} best_j={result.best_value:.6f}")
    for (p, v) in result.history:
        click.echo(f"eval lambda={p[0]:.6f} theta={p[1]:.6f} j={v:.6f}")


main.add_command(optimize_cmd, name="optimize")


@main.command("synth")
@click.option("--spec", "spec_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--seed", type=int, default=None, help="override the spec's seed")
def synth_cmd(spec_path, out_dir, seed):
    """Render a synthetic scene into pipeline-consumable files."""
    try:
        doc = yaml.safe_load(Path(spec_path).read_text())
        if seed is not None:
            doc["seed"] = seed
        spec = synth.scene_spec_from_dict(doc)
        manifest_path = synth.write_scene(spec, out_dir)
    except (AreatrackError, KeyError, TypeError, ValueError, yaml.YAMLError) as e:
        _fail(str(e))
    click.echo(str(manifest_path))


@main.command("bench-mbtp")
@click.option("--width", type=int, default=1920)
@click.option("--height", type=int, default=1080)
@click.option("--boxes", type=int, default=5)
@click.option("--box-size", type=int, default=200)
@click.option("--iters", type=int, default=100)
@click.option("--seed", type=int, default=0)
def bench_mbtp(width, height, boxes, box_size, iters, seed):
    """Per-frame latency of the area estimator."""
    rng = np.random.default_rng(seed)
    intr = CameraIntrinsics(f_u=1000.0, f_v=1000.0, p_u=width / 2, p_v=height / 2,
                            width=width, height=height)
    depth = DepthMap(width, height,
                     5.0 + 0.1 * rng.standard_normal((height, width)).astype(np.float32))
    bxs = [
        BBox(
            float(rng.uniform(0, width - box_size - 1)),
            float(rng.uniform(0, height - box_size - 1)),
            float(box_size),
            float(box_size),
        )
        for _ in range(boxes)
    ]
    times = []
    for _ in range(iters):
        t0 = time.perf_counter()
        for b in bxs:
            estimate_area(b, depth, intr, 0.9)
        times.append((time.perf_counter() - t0) * 1e3)
    times = np.array(times)
    click.echo(f"frames={iters} boxes={boxes} box_size={box_size}px "
               f"image={width}x{height}")
    click.echo(f"mean_ms={times.mean():.3f} p95_ms={np.percentile(times, 95):.3f} "
               f"min_ms={times.min():.3f} max_ms={times.max():.3f}")


if __name__ == "__main__":
    main()
