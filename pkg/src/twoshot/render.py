"""Point-based novel view renderer.

The two flow-augmented LDIs become 3D point clouds. For a frame at time t,
cloud 0 moves forward along its scene flow by t and cloud 1 backward by
1 - t; both are splatted into the target camera and blended per pixel with
a soft depth-aware weight, then residual holes are diffused shut.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _splat
from .camera import Camera, unproject
from .imaging import DenseMap
from .ldi import Ldi
from .pushpull import push_pull

RADIUS_CLAMP_PX = (0.5, 8.0)


class RenderError(RuntimeError):
    pass


@dataclass(frozen=True)
class RenderParams:
    """Knobs of the splat renderer; defaults mirror the config file."""

    beta: float = 10.0
    base_radius_px: float = 1.7
    band: float = 0.05
    alpha_z: float = 60.0

    def __post_init__(self):
        if not (np.isfinite(self.beta) and self.beta > 0):
            raise ValueError("beta must be finite and > 0")
        if self.base_radius_px <= 0 or self.band <= 0 or self.alpha_z < 0:
            raise ValueError("invalid splat parameters")


@dataclass
class PointCloud:
    """Flat point soup in reference-camera coordinates, z > 0 everywhere."""

    xyz: np.ndarray      # (N, 3) float64
    color: np.ndarray    # (N, 4) float32 RGBA
    u: np.ndarray        # (N, 3) float64 scene flow
    r_world: np.ndarray  # (N,) float64; pixel radius at depth z is r_world / z

    def __len__(self) -> int:
        return len(self.xyz)


@dataclass
class SplatBuffers:
    """Raw weighted accumulators from one splat pass."""

    color_accum: np.ndarray  # (H, W, 4)
    depth_accum: np.ndarray  # (H, W)
    weight: np.ndarray       # (H, W)

    @property
    def covered(self) -> np.ndarray:
        return self.weight > 0

    def normalized(self) -> tuple[np.ndarray, np.ndarray]:
        """Weight-normalized (color, depth); zeros where nothing landed."""
        w = np.where(self.weight > 0, self.weight, 1.0)
        return self.color_accum / w[:, :, None], self.depth_accum / w


def point_radius(disparity: np.ndarray, base_radius_px: float,
                 reference_disparity: float) -> np.ndarray:
    """Pixel radius proportional to disparity, anchored at the cloud median."""
    r = base_radius_px * np.asarray(disparity, dtype=np.float64) / reference_disparity
    return np.clip(r, *RADIUS_CLAMP_PX)


def lift_ldi(ldi: Ldi, K: np.ndarray, base_radius_px: float = 1.7) -> PointCloud:
    """One point per alpha=1 LDI pixel, unprojected through K.

    The world-space radius scale is chosen so that a point's pixel radius in
    any view equals base_radius_px times its view disparity over the cloud's
    median reference disparity (then clamped): r_world = base / median_disp.
    """
    xs_all, cols_all, us_all = [], [], []
    for layer in ldi.layers:
        mask = layer.alpha
        if layer.scene_flow is None or not np.all(layer.scene_flow.defined_mask[mask]):
            raise RenderError("missing flow coverage on an LDI layer")
        ys, xs = np.nonzero(mask)
        disp = layer.disparity[ys, xs].astype(np.float64)
        pix = np.stack([xs, ys], axis=1).astype(np.float64)
        xs_all.append(unproject(pix, 1.0 / disp, K))
        cols_all.append(layer.color[ys, xs])
        us_all.append(layer.scene_flow.u[ys, xs].astype(np.float64))

    xyz = np.concatenate(xs_all, axis=0)
    color = np.concatenate(cols_all, axis=0).astype(np.float32)
    u = np.concatenate(us_all, axis=0)
    median_disp = float(np.median(1.0 / xyz[:, 2]))
    r_world = np.full(len(xyz), base_radius_px / median_disp)
    return PointCloud(xyz=xyz, color=color, u=u, r_world=r_world)


def displace(cloud: PointCloud, t: float, from_one: bool = False) -> np.ndarray:
    """Positions at time t: x + t*u from time 0, or x + (1-t)*u from time 1."""
    if not 0.0 <= t <= 1.0:
        raise ValueError("t must lie in [0, 1]")
    s = (1.0 - t) if from_one else t
    return cloud.xyz + s * cloud.u


def splat(positions: np.ndarray, cloud: PointCloud, camera: Camera,
          params: RenderParams) -> SplatBuffers:
    """Soft-splat displaced points into the camera; z <= 0 points are culled."""
    pix, z = camera.project(positions)
    safe_z = np.where(z > 0, z, 1.0)
    rad = np.clip(cloud.r_world / safe_z, *RADIUS_CLAMP_PX)
    color_accum, depth_accum, weight = _splat.splat_points(
        pix[:, 0], pix[:, 1], z, rad, cloud.color.astype(np.float64),
        camera.width, camera.height, params.band, params.alpha_z)
    return SplatBuffers(color_accum=color_accum, depth_accum=depth_accum,
                        weight=weight)


@dataclass
class BlendResult:
    color: np.ndarray     # (H, W, 4)
    depth: np.ndarray     # (H, W)
    w_t: np.ndarray       # (H, W) weight given to the time-0 buffer
    coverage: np.ndarray  # (H, W) bool


def blend_weight(t, beta, d0, d1, depth_scale: float = 1.0):
    """Time-and-depth blending weight for the time-0 render.

    W = (1-t) exp(-beta d0) / ((1-t) exp(-beta d0) + t exp(-beta d1)) with
    depths divided by depth_scale. Evaluated with a min-shift so the
    exponentials never underflow together.
    """
    t = np.asarray(t, dtype=np.float64)
    d0 = np.asarray(d0, dtype=np.float64) / depth_scale
    d1 = np.asarray(d1, dtype=np.float64) / depth_scale
    m = np.minimum(d0, d1)
    s0 = (1.0 - t) * np.exp(-beta * (d0 - m))
    s1 = t * np.exp(-beta * (d1 - m))
    w = np.where(t <= 0.0, 1.0, np.where(t >= 1.0, 0.0,
                 s0 / np.maximum(s0 + s1, np.finfo(np.float64).tiny)))
    return w if w.ndim else float(w)


def blend(buffers0: SplatBuffers, buffers1: SplatBuffers, t: float, beta: float,
          depth_scale: float = 1.0) -> BlendResult:
    """Per-pixel combination of the two time-displaced renders.

    Pixels covered by both buffers use the depth-aware weight; pixels covered
    by one buffer take it outright; uncovered pixels report coverage 0.
    """
    if buffers0.weight.shape != buffers1.weight.shape:
        raise ValueError("buffers must share dimensions")
    c0, d0 = buffers0.normalized()
    c1, d1 = buffers1.normalized()
    in0, in1 = buffers0.covered, buffers1.covered

    w = blend_weight(t, beta, np.where(in0, d0, 0.0), np.where(in1, d1, 0.0),
                     depth_scale)
    w = np.where(in0 & ~in1, 1.0, w)
    w = np.where(in1 & ~in0, 0.0, w)
    coverage = in0 | in1
    w = np.where(coverage, w, 0.0)

    color = w[:, :, None] * c0 + (1.0 - w[:, :, None]) * c1
    depth = w * d0 + (1.0 - w) * d1
    color[~coverage] = 0.0
    depth[~coverage] = 0.0
    return BlendResult(color=color, depth=depth, w_t=w, coverage=coverage)


def fill_and_compose(blended: BlendResult) -> np.ndarray:
    """Final (H, W, 3) frame in [0, 1]: holes diffused shut, background favored.

    The push-pull fill weights covered pixels by their depth, so farther
    content bleeds into disocclusions in preference to nearby foreground.
    """
    if not np.any(blended.coverage):
        raise RenderError("empty render")
    if np.all(blended.coverage):
        return np.clip(blended.color[:, :, :3], 0.0, 1.0).astype(np.float32)
    weights = np.where(blended.coverage, blended.depth, 0.0).astype(np.float32)
    filled = push_pull(blended.color[:, :, :3].astype(np.float32), weights)
    return np.clip(filled, 0.0, 1.0).astype(np.float32)


def scene_depth_scale(*clouds: PointCloud) -> float:
    """Median depth across the given clouds; the unit for beta and paths."""
    stacks = [c.xyz[:, 2] for c in clouds if len(c)]
    if not stacks:
        raise RenderError("no points to scale by")
    zs = np.concatenate(stacks)
    return float(np.median(zs))


def render_frame(cloud0: PointCloud, cloud1: PointCloud, camera: Camera, t: float,
                 params: RenderParams, depth_scale: float | None = None
                 ) -> tuple[np.ndarray, BlendResult]:
    """Render one frame at time t; returns (RGB image, blend diagnostics)."""
    if depth_scale is None:
        depth_scale = scene_depth_scale(cloud0, cloud1)
    b0 = splat(displace(cloud0, t, from_one=False), cloud0, camera, params)
    b1 = splat(displace(cloud1, t, from_one=True), cloud1, camera, params)
    blended = blend(b0, b1, t, params.beta, depth_scale)
    return fill_and_compose(blended), blended


def dump_frame_buffers(blended: BlendResult, out_dir, index: int) -> None:
    """Debug dump: frame_<n>_{color,depth,weight}.pfm raw float maps."""
    from pathlib import Path

    from .imaging import write_pfm

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_pfm(out / f"frame_{index}_color.pfm",
              blended.color[:, :, :3].astype(np.float32))
    write_pfm(out / f"frame_{index}_depth.pfm", blended.depth.astype(np.float32))
    write_pfm(out / f"frame_{index}_weight.pfm", blended.w_t.astype(np.float32))
