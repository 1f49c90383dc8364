import math

import pytest
import yaml
from click.testing import CliRunner

from areatrack import formats
from areatrack.cdkf import CdkfConfig
from areatrack.cli import main
from areatrack.geometry import BBox, CameraIntrinsics
from areatrack.pipeline import (
    PipelineConfig,
    report_from_records,
    run_pipeline,
    smooth_records,
)
from areatrack.synth import (
    CameraPose,
    NoiseSpec,
    PotholeSpec,
    SceneSpec,
    Surface,
    write_scene,
)

INTR = CameraIntrinsics(f_u=300.0, f_v=300.0, p_u=160.0, p_v=120.0, width=320, height=240)

TRUE_AREA = math.pi * 0.3 * 0.2


def approach_scene(frames=10, seed=0, noisy=True) -> SceneSpec:
    """Camera drives toward a single shallow depression on a flat surface."""
    noise = (
        NoiseSpec(box_jitter_px=0.6, depth_rel_std=0.004, conf_noise_std=0.02)
        if noisy
        else NoiseSpec()
    )
    return SceneSpec(
        intrinsics=INTR,
        surface=Surface(
            kind="plane", z0=6.0,
            potholes=(PotholeSpec(center=(0.0, 0.0), a=0.3, b=0.2, depth=0.015),),
        ),
        frames=frames,
        camera_path=tuple(CameraPose(position=(0.0, 0.0, 0.15 * k)) for k in range(frames)),
        noise=noise,
        n_correspondences=60,
        seed=seed,
    )


@pytest.fixture(scope="module")
def scene_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("scene")
    manifest = write_scene(approach_scene(), out)
    return out, manifest


class TestRunPipeline:
    def test_end_to_end_single_track(self, scene_dir):
        _, manifest_path = scene_dir
        manifest = formats.SequenceManifest.load(manifest_path)
        records, report = run_pipeline(manifest, PipelineConfig())
        assert len(records) == 10
        assert {r.track_id for r in records} == {1}
        assert report.track_count == 1
        # smoothed areas settle near the true elliptical opening
        assert records[-1].area_smoothed_m2 == pytest.approx(TRUE_AREA, rel=0.05)
        for r in records:
            assert r.distance_m > 0
            assert 0.0 < r.valid_patch_fraction <= 1.0

    def test_deterministic_output(self, scene_dir):
        _, manifest_path = scene_dir
        manifest = formats.SequenceManifest.load(manifest_path)
        r1, _ = run_pipeline(manifest, PipelineConfig())
        r2, _ = run_pipeline(manifest, PipelineConfig())
        assert formats.write_results(r1) == formats.write_results(r2)

    def test_smoothing_reduces_frame_to_frame_jitter(self, scene_dir):
        _, manifest_path = scene_dir
        manifest = formats.SequenceManifest.load(manifest_path)
        records, smoothed_rep = run_pipeline(manifest, PipelineConfig())
        raw_rep = report_from_records(records, smoothed=False)
        assert smoothed_rep.afd < raw_rep.afd

    def test_no_smoothing_passthrough(self, scene_dir):
        _, manifest_path = scene_dir
        manifest = formats.SequenceManifest.load(manifest_path)
        records, _ = run_pipeline(manifest, PipelineConfig(smoothing=False))
        for r in records:
            assert r.area_smoothed_m2 == r.area_raw_m2
            assert r.nis == 0.0

    def test_smooth_records_matches_inline_smoothing(self, scene_dir):
        _, manifest_path = scene_dir
        manifest = formats.SequenceManifest.load(manifest_path)
        cfg = CdkfConfig(lam=0.8, theta=0.5)
        inline, _ = run_pipeline(manifest, PipelineConfig(cdkf=cfg))
        raw, _ = run_pipeline(manifest, PipelineConfig(smoothing=False))
        redone = smooth_records(raw, cfg)
        assert [r.area_smoothed_m2 for r in redone] == pytest.approx(
            [r.area_smoothed_m2 for r in inline]
        )
        assert [r.nis for r in redone] == pytest.approx([r.nis for r in inline])

    def test_empty_detection_frames_ok(self, tmp_path):
        # a scene where the depression leaves the view partway through still
        # processes end to end
        spec = SceneSpec(
            intrinsics=INTR,
            surface=Surface(
                kind="plane", z0=6.0,
                potholes=(PotholeSpec(center=(0.0, 0.0), a=0.3, b=0.2, depth=0.015),),
            ),
            frames=4,
            camera_path=tuple(
                CameraPose(position=(2.5 * k, 0.0, 0.0)) for k in range(4)
            ),
            n_correspondences=60,
            seed=1,
        )
        manifest_path = write_scene(spec, tmp_path)
        manifest = formats.SequenceManifest.load(manifest_path)
        records, _ = run_pipeline(manifest, PipelineConfig())
        frames_with_output = {r.frame for r in records}
        assert 0 in frames_with_output
        assert 3 not in frames_with_output


class TestReportFiltering:
    def rec(self, frame, track_id, class_id, smoothed):
        return formats.FrameResultRecord(
            frame=frame, track_id=track_id, class_id=class_id,
            bbox=BBox(0, 0, 10, 10), confidence=0.9, distance_m=5.0,
            area_raw_m2=smoothed, area_smoothed_m2=smoothed, nis=1.0,
            valid_patch_fraction=1.0,
        )

    def test_manhole_class_excluded(self):
        records = [self.rec(k, 1, 0, 0.2) for k in range(6)]
        records += [self.rec(k, 2, 1, 0.5) for k in range(6)]
        rep = report_from_records(records)
        assert rep.track_count == 1
        assert rep.per_track[0].track_id == 1

    def test_first_update_nis_excluded(self):
        records = [self.rec(k, 1, 0, 0.2) for k in range(6)]
        rep = report_from_records(records)
        # 6 records but only 5 innovations enter the NIS average
        assert rep.nis_mean == pytest.approx(1.0)


class TestCli:
    def test_estimate_and_eval_area(self, scene_dir, tmp_path):
        scene, manifest_path = scene_dir
        runner = CliRunner()
        out = tmp_path / "results.txt"
        res = runner.invoke(
            main,
            ["estimate", "--manifest", str(manifest_path), "--out", str(out)],
        )
        assert res.exit_code == 0, res.output
        records = formats.parse_results(out.read_text())
        assert len(records) == 10

        res = runner.invoke(main, ["eval-area", "--results", str(out)])
        assert res.exit_code == 0, res.output
        assert "objective_j=" in res.output
        assert "track=1" in res.output

    def test_estimate_stdout_deterministic(self, scene_dir):
        _, manifest_path = scene_dir
        runner = CliRunner()
        r1 = runner.invoke(main, ["estimate", "--manifest", str(manifest_path)])
        r2 = runner.invoke(main, ["estimate", "--manifest", str(manifest_path)])
        assert r1.exit_code == 0 and r2.exit_code == 0
        assert r1.output == r2.output

    def test_eval_det_against_gt(self, scene_dir):
        scene, _ = scene_dir
        runner = CliRunner()
        # score the noisy detections against the rendered ground truth
        dets = scene / "all_dets.txt"
        merged = {}
        for k in range(10):
            merged.update(formats.parse_detections((scene / f"dets_{k:04d}.txt").read_text()))
        dets.write_text(formats.write_detections(merged))
        res = runner.invoke(
            main,
            ["eval-det", "--dets", str(dets), "--gt", str(scene / "gt_boxes.txt"), "--iou", "0.5"],
        )
        assert res.exit_code == 0, res.output
        assert "recall=1.0000" in res.output
        assert "ap50=" in res.output

    def test_synth_command(self, tmp_path):
        doc = {
            "intrinsics": {"f_u": 300.0, "f_v": 300.0, "p_u": 160.0, "p_v": 120.0,
                           "width": 320, "height": 240},
            "surface": {
                "kind": "plane", "z0": 6.0,
                "potholes": [{"center": [0.0, 0.0], "a": 0.3, "b": 0.2, "depth": 0.015}],
            },
            "frames": 2,
            "seed": 0,
        }
        spec_path = tmp_path / "spec.yaml"
        spec_path.write_text(yaml.safe_dump(doc))
        out = tmp_path / "rendered"
        runner = CliRunner()
        res = runner.invoke(main, ["synth", "--spec", str(spec_path), "--out", str(out)])
        assert res.exit_code == 0, res.output
        manifest = formats.SequenceManifest.load(out / "manifest.yaml")
        assert len(manifest.frames) == 2
        assert (out / "gt_areas.txt").exists()

    def test_optimize_smoke(self, scene_dir):
        _, manifest_path = scene_dir
        runner = CliRunner()
        res = runner.invoke(
            main,
            ["optimize", "--manifest", str(manifest_path), "--n-init", "3", "--n-iter", "2"],
        )
        assert res.exit_code == 0, res.output
        assert "lambda=" in res.output and "best_j=" in res.output
        assert res.output.count("eval ") == 5

    def test_bench_smoke(self):
        runner = CliRunner()
        res = runner.invoke(
            main,
            ["bench-mbtp", "--width", "320", "--height", "240", "--boxes", "2",
             "--box-size", "40", "--iters", "3"],
        )
        assert res.exit_code == 0, res.output
        assert "mean_ms=" in res.output

    def test_missing_manifest_exit_code(self):
        runner = CliRunner()
        res = runner.invoke(main, ["estimate", "--manifest", "/nonexistent.yaml"])
        assert res.exit_code == 2  # usage error from click's path check

    def test_bad_results_file_exit_code(self, tmp_path):
        bad = tmp_path / "bad.txt"
        bad.write_text("frame=0 not_a_record\n")
        runner = CliRunner()
        res = runner.invoke(main, ["eval-area", "--results", str(bad)])
        assert res.exit_code == 1
