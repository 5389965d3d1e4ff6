"""3D scene flow: mutual flow checking, lifting to 3D, and per-layer diffusion.

Each LDI pixel needs a 3D translation vector. Mutually consistent optical
flow is lifted to 3D with the aligned disparities; pixels without a reliable
observation (occlusions, inpainted content) inherit flow diffused from their
own layer, never from other layers.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .camera import unproject
from .imaging import DenseMap, DisparityMap, sample_bilinear, write_pfm
from .ldi import Ldi

DEFAULT_TAU = 1.0


class SceneFlowError(RuntimeError):
    pass


@dataclass(frozen=True)
class FlowPair:
    """Forward/backward flow on the aligned grid plus mutual-consistency masks."""

    f01: DenseMap
    f10: DenseMap
    mutual01: np.ndarray
    mutual10: np.ndarray
    tau: float


@dataclass
class SceneFlowLayer:
    """Per-pixel 3D translations for one LDI layer."""

    u: np.ndarray             # (H, W, 3) float32
    defined_mask: np.ndarray  # (H, W) bool


def mutual_check(f01: DenseMap, f10: DenseMap, tau: float = DEFAULT_TAU
                 ) -> tuple[np.ndarray, np.ndarray]:
    """Masks of pixels whose forward and backward flows agree within tau px.

    A pixel passes when its flow target is in bounds and the round trip
    f(p) + g(p + f(p)) has magnitude <= tau.
    """
    if not tau > 0:
        raise ValueError("tau must be > 0")
    return _one_way(f01, f10, tau), _one_way(f10, f01, tau)


def _one_way(fwd: DenseMap, bwd: DenseMap, tau: float) -> np.ndarray:
    h, w = fwd.height, fwd.width
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    tx = xs + fwd.data[:, :, 0]
    ty = ys + fwd.data[:, :, 1]
    inb = (tx >= 0) & (tx <= w - 1) & (ty >= 0) & (ty <= h - 1)
    back = sample_bilinear(bwd.data, np.clip(tx, 0, w - 1), np.clip(ty, 0, h - 1))
    resid = np.hypot(fwd.data[:, :, 0] + back[:, :, 0],
                     fwd.data[:, :, 1] + back[:, :, 1])
    return inb & (resid <= tau)


def lift_scene_flow(p: np.ndarray, d0: np.ndarray, flow: np.ndarray,
                    d1_at_target: np.ndarray, K: np.ndarray) -> np.ndarray:
    """3D translation for pixels p: unproject both flow endpoints, subtract.

    d0 is the disparity at p in the source image, d1_at_target the aligned
    disparity of the other image sampled at p + flow. Depth is 1/disparity.
    """
    p = np.asarray(p, dtype=np.float64)
    d0 = np.asarray(d0, dtype=np.float64)
    d1 = np.asarray(d1_at_target, dtype=np.float64)
    if np.any(d0 <= 0) or np.any(d1 <= 0):
        raise SceneFlowError("invalid disparity at a flow endpoint")
    x0 = unproject(p, 1.0 / d0, K)
    x1 = unproject(p + np.asarray(flow, dtype=np.float64), 1.0 / d1, K)
    return x1 - x0


def _lift_field(flow: DenseMap, d_src: DisparityMap, d_dst: DisparityMap,
                mutual: np.ndarray, K: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Lift every mutual pixel with valid endpoint disparities.

    Returns (u field (H, W, 3) float32, lifted mask).
    """
    h, w = flow.height, flow.width
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    tx = np.clip(xs + flow.data[:, :, 0], 0, w - 1)
    ty = np.clip(ys + flow.data[:, :, 1], 0, h - 1)

    dvals = sample_bilinear(np.where(d_dst.valid, d_dst.values, 0.0), tx, ty)
    vfrac = sample_bilinear(d_dst.valid.astype(np.float32), tx, ty)
    ok = mutual & d_src.valid & (vfrac >= 1.0 - 1e-6) & (dvals > 0)

    u = np.zeros((h, w, 3), dtype=np.float32)
    if np.any(ok):
        p = np.stack([xs[ok], ys[ok]], axis=1)
        u[ok] = lift_scene_flow(p, d_src.values[ok], flow.data[ok],
                                dvals[ok], K).astype(np.float32)
    return u, ok


def diffuse_flow(layer: SceneFlowLayer, target_mask: np.ndarray) -> SceneFlowLayer:
    """Spread flow into undefined pixels by repeated 3x3 masked box blur.

    Each sweep assigns every undefined pixel with at least one defined
    8-neighbor the plain average of those neighbors; defined pixels never
    change. Sweeps repeat until the target mask is covered. An empty
    defined mask degenerates to zero flow everywhere.
    """
    if not np.any(layer.defined_mask):
        return SceneFlowLayer(u=np.zeros_like(layer.u),
                              defined_mask=np.ones_like(layer.defined_mask))
    if np.all(layer.defined_mask[target_mask]):
        return layer

    defined = layer.defined_mask.copy()
    u = layer.u.astype(np.float64).copy()
    u[~defined] = 0.0

    h, w = defined.shape
    for _ in range(h + w + 2):
        if np.all(defined[target_mask]):
            break
        nsum = _box_sum(u * defined[:, :, None])
        ncnt = _box_sum(defined.astype(np.float64))
        frontier = ~defined & (ncnt > 0)
        u[frontier] = nsum[frontier] / ncnt[frontier, None]
        defined |= frontier
    else:
        raise SceneFlowError("flow diffusion failed to converge")
    return SceneFlowLayer(u=u.astype(np.float32), defined_mask=defined)


def _box_sum(arr: np.ndarray) -> np.ndarray:
    """Sum over the 3x3 neighborhood excluding the center, zero outside."""
    pad = np.pad(arr, [(1, 1), (1, 1)] + [(0, 0)] * (arr.ndim - 2))
    out = np.zeros_like(arr)
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            if dy == 0 and dx == 0:
                continue
            out += pad[1 + dy:1 + dy + arr.shape[0], 1 + dx:1 + dx + arr.shape[1]]
    return out


def attach_flow_to_ldi(ldi0: Ldi, ldi1: Ldi, flows: FlowPair, d0: DisparityMap,
                       d1_aligned: DisparityMap, K: np.ndarray) -> tuple[Ldi, Ldi]:
    """Give every layer of both LDIs a complete scene-flow field.

    LDI0 layers carry time-0-to-1 motion lifted from forward flow; LDI1
    layers carry time-1-to-0 motion lifted from backward flow. Observed
    mutual pixels get exact lifts; everything else (occlusions, inpainted
    pixels) is filled by within-layer diffusion.
    """
    u0, ok0 = _lift_field(flows.f01, d0, d1_aligned, flows.mutual01, K)
    u1, ok1 = _lift_field(flows.f10, d1_aligned, d0, flows.mutual10, K)
    return (_attach(ldi0, u0, ok0), _attach(ldi1, u1, ok1))


def _attach(ldi: Ldi, u: np.ndarray, lifted: np.ndarray) -> Ldi:
    out = []
    for layer in ldi.layers:
        seed = lifted & layer.origin_mask
        raw = SceneFlowLayer(u=np.where(seed[:, :, None], u, 0.0).astype(np.float32),
                             defined_mask=seed)
        flow = diffuse_flow(raw, layer.alpha)
        out.append(replace(layer, scene_flow=flow))
    return Ldi(layers=out)


def dump_scene_flow(ldi: Ldi, out_dir, image_tag: str) -> list[Path]:
    """Write per-layer flow components as sflow_<image>_<layer>_{x,y,z}.pfm."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for layer in ldi.layers:
        if layer.scene_flow is None:
            raise SceneFlowError("layer has no scene flow attached")
        for ci, tag in enumerate("xyz"):
            path = out_dir / f"sflow_{image_tag}_{layer.layer_index}_{tag}.pfm"
            write_pfm(path, layer.scene_flow.u[:, :, ci])
            written.append(path)
    return written
