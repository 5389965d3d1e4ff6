"""End-to-end pipeline and CLI tests on a synthetic two-plane scene."""

import json
import math
from pathlib import Path

import numpy as np
import pytest

from twoshot.bundle import read_bundle
from twoshot.camera import intrinsics_from_fov
from twoshot.cli import main
from twoshot.config import PipelineConfig
from twoshot.imaging import read_disparity, read_flow, read_image
from twoshot.pipeline import PipelineError, _psnr, run_pipeline

from synthetic import make_scene, make_static_scene, write_scene


@pytest.fixture(scope="module")
def scene_dir(tmp_path_factory):
    """Scene inputs written once; every test builds its own output dir."""
    root = tmp_path_factory.mktemp("scene")
    scene = make_scene(192, 144)
    paths = write_scene(scene, root)
    return scene, paths, root


def _config(paths, out_dir, **kw):
    # The circle path returns home at t=1, so both endpoint frames are
    # rendered from the identity camera and comparable to the inputs.
    defaults = dict(output_dir=str(out_dir), frames=3, path_kind="circle",
                    amplitude=0.05, seed=7)
    defaults.update(kw)
    return PipelineConfig(**paths, **defaults)


@pytest.fixture(scope="module")
def full_run(scene_dir, tmp_path_factory):
    scene, paths, _ = scene_dir
    out = tmp_path_factory.mktemp("full")
    cfg = _config(paths, out)
    manifest = run_pipeline(cfg)
    return scene, cfg, manifest, out


def test_manifest_parameters_echo_reconstructs_config(full_run):
    _, cfg, manifest, _ = full_run
    assert PipelineConfig(**manifest["parameters"]) == cfg


def test_manifest_image_size_and_intrinsics(full_run):
    scene, _, manifest, _ = full_run
    assert manifest["image_size"] == [192, 144]
    np.testing.assert_allclose(np.asarray(manifest["intrinsics"]),
                               intrinsics_from_fov(192, 144, 55.0))


def test_recovered_homography_matches_camera_rotation(full_run):
    scene, _, manifest, _ = full_run
    # Image 1 differs from image 0 by a pure rotation, so the static
    # background is exactly K R1 K^-1 up to projective scale.
    truth = scene.K @ scene.R1 @ np.linalg.inv(scene.K)
    truth /= truth[2, 2]
    np.testing.assert_allclose(np.asarray(manifest["homography"]), truth,
                               atol=1e-3)


def test_disparity_alignment_near_identity(full_run):
    _, _, manifest, _ = full_run
    fit = manifest["disparity_alignment"]
    # Both views share the metric depth scale, so the fit is ~(1, 0);
    # resampling blur costs a few tenths of a percent at this resolution.
    assert abs(fit["scale"] - 1.0) < 0.05
    assert abs(fit["shift"]) < 0.01


def test_layer_counts_within_cap(full_run):
    _, _, manifest, _ = full_run
    for key in ("ldi0", "ldi1"):
        assert 2 <= manifest["layers"][key] <= 5


def test_depth_scale_near_median_scene_depth(full_run):
    scene, _, manifest, _ = full_run
    # The background plane covers most pixels, so the median disparity
    # point cloud depth sits near its depth.
    assert scene.zf < manifest["depth_scale"] < scene.zb * 1.3


def test_frame_records_and_endpoint_psnr(full_run):
    _, _, manifest, out = full_run
    frames = manifest["frames"]
    assert [f["index"] for f in frames] == [0, 1, 2]
    assert [f["t"] for f in frames] == [0.0, 0.5, 1.0]
    for f in frames:
        assert (out / f["file"]).exists()
    assert frames[0]["psnr_vs_input0"] > 20.0
    assert frames[2]["psnr_vs_input1"] > 20.0
    assert "psnr_vs_input0" not in frames[1]
    assert "psnr_vs_input1" not in frames[1]


def test_bundle_matches_manifest_counts(full_run):
    _, _, manifest, out = full_run
    cloud0, cloud1, k = read_bundle(out / manifest["bundle"])
    assert len(cloud0) == manifest["points"]["cloud0"]
    assert len(cloud1) == manifest["points"]["cloud1"]
    np.testing.assert_allclose(k, np.asarray(manifest["intrinsics"]),
                               rtol=1e-6)


def test_timings_cover_all_stages(full_run):
    _, _, manifest, _ = full_run
    timings = manifest["timings_ms"]
    for stage in ("load", "align", "ldi", "scene-flow", "render", "export"):
        assert timings[stage] > 0.0
    assert len(timings["render_per_frame"]) == 3
    expected = sum(timings[k] for k in ("load", "align", "ldi", "scene-flow"))
    assert math.isclose(timings["preprocess_total"], expected)


def test_manifest_written_to_output_dir(full_run):
    _, _, manifest, out = full_run
    on_disk = json.loads((out / "manifest.json").read_text())
    assert on_disk == json.loads(json.dumps(manifest))


def test_reruns_are_bit_identical(scene_dir, tmp_path):
    _, paths, _ = scene_dir
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        run_pipeline(_config(paths, out, frames=2))
        outs.append(out)
    man_a = json.loads((outs[0] / "manifest.json").read_text())
    man_b = json.loads((outs[1] / "manifest.json").read_text())
    man_a.pop("timings_ms")
    man_b.pop("timings_ms")
    man_a["parameters"].pop("output_dir")
    man_b["parameters"].pop("output_dir")
    assert man_a == man_b
    for name in ("frame_0000.png", "frame_0001.png", "scene.ldim"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


def test_align_stage_writes_aligned_artifacts(scene_dir, tmp_path):
    scene, paths, _ = scene_dir
    manifest = run_pipeline(_config(paths, tmp_path), last_stage="align")
    assert "homography" in manifest
    assert "layers" not in manifest
    assert "frames" not in manifest
    image = read_image(tmp_path / "aligned_image1.png")
    assert (image.width, image.height) == (192, 144)
    disparity = read_disparity(tmp_path / "aligned_disparity1.pfm")
    assert disparity.values.shape == (144, 192)
    for name in ("aligned_flow01.flo", "aligned_flow10.flo"):
        assert read_flow(tmp_path / name).data.shape == (144, 192, 2)


def test_ldi_stage_stops_before_scene_flow(scene_dir, tmp_path):
    _, paths, _ = scene_dir
    manifest = run_pipeline(_config(paths, tmp_path), last_stage="ldi")
    assert "layers" in manifest
    assert "points" not in manifest
    assert (tmp_path / "ldi_0_0.png").exists()
    assert (tmp_path / "ldi_1_0.pfm").exists()


def test_export_without_render_skips_frames(scene_dir, tmp_path):
    _, paths, _ = scene_dir
    manifest = run_pipeline(_config(paths, tmp_path), do_render=False)
    assert "frames" not in manifest
    assert (tmp_path / manifest["bundle"]).exists()
    assert not list(tmp_path.glob("frame_*.png"))


def test_missing_input_fails_in_load_stage(scene_dir, tmp_path):
    _, paths, _ = scene_dir
    broken = dict(paths, image0=str(tmp_path / "nope.png"))
    with pytest.raises(PipelineError) as excinfo:
        run_pipeline(_config(broken, tmp_path / "out"))
    assert excinfo.value.stage == "load"
    assert excinfo.value.exit_code == 3
    assert "stage 'load' failed" in str(excinfo.value)


def test_size_mismatch_fails_in_load_stage(scene_dir, tmp_path):
    _, paths, _ = scene_dir
    small = make_scene(96, 72)
    other = write_scene(small, tmp_path / "small")
    broken = dict(paths, disparity1=other["disparity1"])
    with pytest.raises(PipelineError) as excinfo:
        run_pipeline(_config(broken, tmp_path / "out"))
    assert excinfo.value.stage == "load"


def test_static_scene_static_camera_frames_identical(tmp_path):
    scene = make_static_scene(128, 96)
    paths = write_scene(scene, tmp_path / "in")
    out = tmp_path / "out"
    run_pipeline(PipelineConfig(**paths, output_dir=str(out), frames=3,
                                path_kind="static", amplitude=0.0),
                 do_export=False)
    # The two clouds are built through independent float paths, so the
    # frames may disagree by quantization flips but nothing visible.
    first = read_image(out / "frame_0000.png").data
    for name in ("frame_0001.png", "frame_0002.png"):
        other = read_image(out / name).data
        assert np.abs(other - first).max() <= 1.01 / 255.0


def test_psnr_helper_edge_cases():
    ones = np.ones((4, 4, 3))
    mask = np.ones((4, 4), bool)
    assert _psnr(ones, ones, np.zeros((4, 4), bool)) == 0.0
    assert _psnr(ones, ones, mask) == 99.0
    # Uniform error of 0.1 over the mask: PSNR = -10 log10(0.01) = 20.
    assert math.isclose(_psnr(ones, ones - 0.1, mask), 20.0, rel_tol=1e-6)


def test_cli_pipeline_verb_runs_and_writes_manifest(scene_dir, tmp_path):
    _, paths, _ = scene_dir
    code = main(["pipeline",
                 "--image0", paths["image0"], "--image1", paths["image1"],
                 "--disparity0", paths["disparity0"],
                 "--disparity1", paths["disparity1"],
                 "--flow01", paths["flow01"], "--flow10", paths["flow10"],
                 "--output-dir", str(tmp_path), "--frames", "2",
                 "--path-kind", "static", "--amplitude", "0.0"])
    assert code == 0
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["parameters"]["frames"] == 2
    assert (tmp_path / "frame_0001.png").exists()
    assert (tmp_path / "scene.ldim").exists()


def test_cli_align_verb_stops_after_alignment(scene_dir, tmp_path):
    _, paths, _ = scene_dir
    code = main(["align",
                 "--image0", paths["image0"], "--image1", paths["image1"],
                 "--disparity0", paths["disparity0"],
                 "--disparity1", paths["disparity1"],
                 "--flow01", paths["flow01"], "--flow10", paths["flow10"],
                 "--output-dir", str(tmp_path)])
    assert code == 0
    assert (tmp_path / "aligned_image1.png").exists()
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert "layers" not in manifest


def test_cli_config_file_with_flag_override(scene_dir, tmp_path):
    _, paths, _ = scene_dir
    cfg_file = tmp_path / "cfg.yaml"
    lines = [f"{key}: {value}" for key, value in paths.items()]
    lines += [f"output_dir: {tmp_path / 'out'}", "frames: 5",
              "path_kind: static", "amplitude: 0.0"]
    cfg_file.write_text("\n".join(lines) + "\n")
    code = main(["pipeline", "--config", str(cfg_file), "--frames", "2"])
    assert code == 0
    manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert manifest["parameters"]["frames"] == 2
    assert len(manifest["frames"]) == 2


def test_cli_missing_input_exit_code_and_stderr(scene_dir, tmp_path, capsys):
    _, paths, _ = scene_dir
    code = main(["pipeline",
                 "--image0", str(tmp_path / "absent.png"),
                 "--image1", paths["image1"],
                 "--disparity0", paths["disparity0"],
                 "--disparity1", paths["disparity1"],
                 "--flow01", paths["flow01"], "--flow10", paths["flow10"],
                 "--output-dir", str(tmp_path)])
    assert code == 3
    assert "stage 'load' failed" in capsys.readouterr().err


def test_cli_bad_config_exit_code(tmp_path, capsys):
    cfg_file = tmp_path / "cfg.yaml"
    cfg_file.write_text("no_such_option: 1\n")
    code = main(["pipeline", "--config", str(cfg_file)])
    assert code == 2
    assert "stage 'config' failed" in capsys.readouterr().err
