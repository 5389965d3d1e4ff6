"""End-to-end pipeline: load, align, layer, lift, render, export.

Stages run in a fixed order, each timed and error-wrapped so a failure
reports the stage it happened in. The manifest echoes every effective
parameter; everything except the measured timings is reproducible
bit-for-bit for a fixed config and seed.
"""

from __future__ import annotations

import json
import math
import time
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import _splat, alignment, sceneflow
from .bundle import write_bundle
from .config import PipelineConfig
from .imaging import (DenseMap, DisparityMap, read_disparity, read_flow,
                      read_image, write_disparity, write_flow, write_image)
from .ldi import Ldi, build_inpainted_ldi, default_margin, dump_ldi
from .render import (PointCloud, RenderParams, lift_ldi, render_frame,
                     scene_depth_scale)
from .paths import CameraPath, generate_path

STAGE_EXIT_CODES = {
    "config": 2, "load": 3, "align": 4, "ldi": 5, "scene-flow": 6,
    "render": 7, "export": 8,
}


class PipelineError(RuntimeError):
    def __init__(self, stage: str, cause: Exception | str):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage

    @property
    def exit_code(self) -> int:
        return STAGE_EXIT_CODES.get(self.stage, 1)


@contextmanager
def _stage(name: str, timings: dict):
    start = time.perf_counter()
    try:
        yield
    except PipelineError:
        raise
    except Exception as exc:
        raise PipelineError(name, exc) from exc
    finally:
        timings[name] = (time.perf_counter() - start) * 1000.0


@dataclass
class LoadedInputs:
    image0: DenseMap
    image1: DenseMap
    disparity0: DisparityMap
    disparity1: DisparityMap
    flow01: DenseMap
    flow10: DenseMap
    K: np.ndarray


@dataclass
class AlignedScene:
    """Everything re-expressed on the reference (image 0) pixel grid."""

    image0: DenseMap
    disparity0: DisparityMap
    image1: DenseMap
    disparity1: DisparityMap
    flow01: DenseMap
    flow10: DenseMap
    valid1: np.ndarray
    homography: alignment.Homography
    disparity_fit: alignment.DisparityAlignment
    K: np.ndarray

    @property
    def size(self) -> tuple[int, int]:
        return self.image0.width, self.image0.height


def load_inputs(cfg: PipelineConfig) -> LoadedInputs:
    paths = cfg.input_paths()
    missing = [k for k, v in paths.items() if not v]
    if missing:
        raise FileNotFoundError(f"missing input paths in config: {missing}")
    image0 = read_image(paths["image0"])
    image1 = read_image(paths["image1"])
    disparity0 = read_disparity(paths["disparity0"])
    disparity1 = read_disparity(paths["disparity1"])
    flow01 = read_flow(paths["flow01"])
    flow10 = read_flow(paths["flow10"])

    shape = (image0.height, image0.width)
    for name, arr in (("image1", image1), ("flow01", flow01), ("flow10", flow10)):
        if (arr.height, arr.width) != shape:
            raise ValueError(f"{name} dimensions {arr.data.shape[:2]} != image0 {shape}")
    for name, dm in (("disparity0", disparity0), ("disparity1", disparity1)):
        if dm.values.shape != shape:
            raise ValueError(f"{name} dimensions {dm.values.shape} != image0 {shape}")
    K = cfg.intrinsics(image0.width, image0.height)
    return LoadedInputs(image0, image1, disparity0, disparity1, flow01, flow10, K)


def align_scene(inputs: LoadedInputs, cfg: PipelineConfig) -> AlignedScene:
    # Correspondences must be both static (small flow) and mutually
    # consistent; the mutual check drops pixels occluded in the other
    # view, whose flow would otherwise poison the disparity fit.
    static = alignment.static_mask(inputs.flow01, cfg.static_keep_fraction)
    mutual01, _ = sceneflow.mutual_check(inputs.flow01, inputs.flow10, cfg.tau)
    corrs = alignment.correspondences_from_flow(inputs.flow01, static & mutual01)
    h = alignment.estimate_homography(corrs, seed=cfg.seed)
    image1, disp1_warped, flow10, valid1 = alignment.warp_to_reference(
        inputs.image1, inputs.disparity1, inputs.flow10, h)
    flow01 = alignment.align_forward_flow(inputs.flow01, h)
    fit = alignment.fit_disparity_alignment(inputs.disparity0, disp1_warped, corrs)
    disparity1 = fit.apply(disp1_warped)
    return AlignedScene(image0=inputs.image0, disparity0=inputs.disparity0,
                        image1=image1, disparity1=disparity1, flow01=flow01,
                        flow10=flow10, valid1=valid1 & disparity1.valid,
                        homography=h, disparity_fit=fit, K=inputs.K)


def build_ldis(scene: AlignedScene, cfg: PipelineConfig) -> tuple[Ldi, Ldi]:
    margin = cfg.inpaint_margin
    if margin is None:
        margin = default_margin(*scene.size)
    ldi0 = build_inpainted_ldi(scene.image0, scene.disparity0,
                               cfg.cluster_threshold, margin)
    ldi1 = build_inpainted_ldi(scene.image1, scene.disparity1,
                               cfg.cluster_threshold, margin)
    return ldi0, ldi1


def attach_scene_flow(scene: AlignedScene, ldi0: Ldi, ldi1: Ldi,
                      cfg: PipelineConfig) -> tuple[Ldi, Ldi, sceneflow.FlowPair]:
    mutual01, mutual10 = sceneflow.mutual_check(scene.flow01, scene.flow10, cfg.tau)
    mutual10 &= scene.valid1
    flows = sceneflow.FlowPair(f01=scene.flow01, f10=scene.flow10,
                               mutual01=mutual01, mutual10=mutual10, tau=cfg.tau)
    ldi0, ldi1 = sceneflow.attach_flow_to_ldi(ldi0, ldi1, flows, scene.disparity0,
                                              scene.disparity1, scene.K)
    return ldi0, ldi1, flows


def lift_clouds(scene: AlignedScene, ldi0: Ldi, ldi1: Ldi,
                cfg: PipelineConfig) -> tuple[PointCloud, PointCloud, float]:
    cloud0 = lift_ldi(ldi0, scene.K, cfg.base_radius_px)
    cloud1 = lift_ldi(ldi1, scene.K, cfg.base_radius_px)
    return cloud0, cloud1, scene_depth_scale(cloud0, cloud1)


def _psnr(a: np.ndarray, b: np.ndarray, mask: np.ndarray) -> float:
    if not np.any(mask):
        return 0.0
    diff = (a - b)[mask]
    mse = float(np.mean(diff ** 2))
    if mse <= 1e-12:
        return 99.0
    return min(99.0, 10.0 * math.log10(1.0 / mse))


def render_path_frames(scene: AlignedScene, cloud0: PointCloud, cloud1: PointCloud,
                       depth_scale: float, path: CameraPath, cfg: PipelineConfig,
                       out_dir: Path) -> tuple[list[dict], list[float]]:
    params = RenderParams(beta=cfg.beta, base_radius_px=cfg.base_radius_px,
                          band=cfg.band, alpha_z=cfg.alpha_z)
    records, per_frame_ms = [], []
    for index, (camera, t) in enumerate(path):
        start = time.perf_counter()
        rgb, blended = render_frame(cloud0, cloud1, camera, t, params, depth_scale)
        per_frame_ms.append((time.perf_counter() - start) * 1000.0)

        name = f"frame_{index:04d}.png"
        write_image(out_dir / name, rgb)
        entry = {"index": index, "file": name, "t": t}
        if t == 0.0:
            entry["psnr_vs_input0"] = round(
                _psnr(rgb, scene.image0.data[:, :, :3], blended.coverage), 4)
        if t == 1.0:
            mask = blended.coverage & scene.valid1
            entry["psnr_vs_input1"] = round(
                _psnr(rgb, scene.image1.data[:, :, :3], mask), 4)
        records.append(entry)
    return records, per_frame_ms


def run_pipeline(cfg: PipelineConfig, *, do_render: bool = True,
                 do_export: bool = True,
                 last_stage: Optional[str] = None) -> dict:
    """Execute the pipeline up to `last_stage` (inclusive); returns the manifest.

    Stages in order: load, align, ldi, scene-flow, render, export. The
    manifest is also written to <output_dir>/manifest.json once rendering
    (or the last requested stage) completes.
    """
    timings: dict[str, float] = {}
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest: dict = {"parameters": cfg.echo()}

    def done(stage: str) -> bool:
        return last_stage == stage

    with _stage("load", timings):
        inputs = load_inputs(cfg)
    manifest["image_size"] = [inputs.image0.width, inputs.image0.height]
    manifest["intrinsics"] = inputs.K.tolist()
    if done("load"):
        return _finish(manifest, timings, out_dir)

    with _stage("align", timings):
        scene = align_scene(inputs, cfg)
    manifest["homography"] = scene.homography.matrix.tolist()
    manifest["disparity_alignment"] = {"scale": scene.disparity_fit.scale,
                                       "shift": scene.disparity_fit.shift}
    if cfg.dump_intermediates or done("align"):
        write_image(out_dir / "aligned_image1.png", scene.image1.data)
        write_disparity(out_dir / "aligned_disparity1.pfm", scene.disparity1)
        write_flow(out_dir / "aligned_flow01.flo", scene.flow01)
        write_flow(out_dir / "aligned_flow10.flo", scene.flow10)
    if done("align"):
        return _finish(manifest, timings, out_dir)

    with _stage("ldi", timings):
        ldi0, ldi1 = build_ldis(scene, cfg)
    manifest["layers"] = {"ldi0": len(ldi0), "ldi1": len(ldi1)}
    if cfg.dump_intermediates or done("ldi"):
        dump_ldi(ldi0, out_dir, "0")
        dump_ldi(ldi1, out_dir, "1")
    if done("ldi"):
        return _finish(manifest, timings, out_dir)

    with _stage("scene-flow", timings):
        ldi0, ldi1, _ = attach_scene_flow(scene, ldi0, ldi1, cfg)
        cloud0, cloud1, depth_scale = lift_clouds(scene, ldi0, ldi1, cfg)
        _splat.warmup()
    manifest["points"] = {"cloud0": len(cloud0), "cloud1": len(cloud1)}
    manifest["depth_scale"] = depth_scale
    if cfg.dump_intermediates:
        sceneflow.dump_scene_flow(ldi0, out_dir, "0")
        sceneflow.dump_scene_flow(ldi1, out_dir, "1")
    if done("scene-flow"):
        return _finish(manifest, timings, out_dir)

    if do_render:
        with _stage("render", timings):
            width, height = scene.size
            path = generate_path(cfg.path_kind, cfg.frames,
                                 cfg.amplitude * depth_scale, scene.K,
                                 width, height, cfg.time_spec)
            frames, per_frame = render_path_frames(scene, cloud0, cloud1,
                                                   depth_scale, path, cfg, out_dir)
        manifest["frames"] = frames
        timings["render_per_frame"] = per_frame
        if done("render"):
            return _finish(manifest, timings, out_dir)

    if do_export:
        with _stage("export", timings):
            bundle_path = out_dir / "scene.ldim"
            write_bundle(bundle_path, cloud0, cloud1, scene.K)
        manifest["bundle"] = bundle_path.name

    return _finish(manifest, timings, out_dir)


def _finish(manifest: dict, timings: dict, out_dir: Path) -> dict:
    preprocess = sum(timings.get(k, 0.0)
                     for k in ("load", "align", "ldi", "scene-flow"))
    timings["preprocess_total"] = preprocess
    manifest["timings_ms"] = timings
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return manifest
