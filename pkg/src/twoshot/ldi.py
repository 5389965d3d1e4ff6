"""Layered depth images: disparity clustering, layer splitting, inpainting.

Each aligned RGB-D input is split at depth discontinuities into 2-5 layers
(hard cap 5). Occluded parts of each layer are then filled by push-pull
diffusion seeded from the layers at and behind it, with a depth clamp that
stops the fill from occluding anything farther back.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import TYPE_CHECKING, Optional

import numpy as np
from scipy import ndimage

from .imaging import DenseMap, DisparityMap, write_image, write_pfm
from .pushpull import push_pull

if TYPE_CHECKING:
    from .sceneflow import SceneFlowLayer

MAX_LAYERS = 5
HIST_BINS = 256


class LdiError(RuntimeError):
    pass


@dataclass
class LdiLayer:
    """One RGBDA layer. Alpha is binary coverage; origin_mask marks observed
    (as opposed to inpainted) pixels. Disparity is meaningful exactly where
    alpha = 1."""

    color: np.ndarray        # (H, W, 4) float32 RGBA
    disparity: np.ndarray    # (H, W) float32
    origin_mask: np.ndarray  # (H, W) bool
    layer_index: int
    scene_flow: Optional["SceneFlowLayer"] = None

    @property
    def alpha(self) -> np.ndarray:
        return self.color[:, :, 3] > 0.5

    def min_observed_disparity(self) -> float:
        return float(self.disparity[self.origin_mask].min())

    def mean_observed_disparity(self) -> float:
        return float(self.disparity[self.origin_mask].mean())


@dataclass
class Ldi:
    """Ordered stack of layers, index 0 nearest."""

    layers: list[LdiLayer] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.layers)

    @property
    def shape(self) -> tuple[int, int]:
        return self.layers[0].color.shape[:2]


def cluster_disparity(disparity: DisparityMap, threshold: float) -> np.ndarray:
    """Label pixels by single-linkage clusters of their disparity values.

    The occupied disparity range is normalized to [0, 1] and histogrammed
    into 256 bins; runs of occupied bins whose gaps stay within `threshold`
    (relative to the range) form one cluster. If more than five clusters
    emerge, the pair with the smallest gap is merged until five remain.

    Returns an int32 label map: -1 for invalid pixels, otherwise the
    cluster id ordered far-to-near (0 = smallest disparity).
    """
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must be in (0, 1)")
    valid = disparity.valid
    if not np.any(valid):
        raise LdiError("all-invalid disparity map")

    labels = np.full(disparity.values.shape, -1, dtype=np.int32)
    vals = disparity.values[valid]
    lo, hi = float(vals.min()), float(vals.max())
    if hi - lo < 1e-12:
        labels[valid] = 0
        return labels

    norm = (disparity.values - lo) / (hi - lo)
    bins = np.clip((norm * HIST_BINS).astype(np.int32), 0, HIST_BINS - 1)
    occupied = np.zeros(HIST_BINS, dtype=bool)
    occupied[bins[valid]] = True
    occ = np.nonzero(occupied)[0]
    centers = (occ + 0.5) / HIST_BINS

    # Single linkage in 1-D: clusters are maximal runs with gaps <= threshold.
    splits = np.nonzero(np.diff(centers) > threshold)[0]
    bounds = [0, *(splits + 1), len(occ)]
    segments = [(bounds[i], bounds[i + 1]) for i in range(len(bounds) - 1)]

    while len(segments) > MAX_LAYERS:
        gaps = [centers[segments[i + 1][0]] - centers[segments[i][1] - 1]
                for i in range(len(segments) - 1)]
        i = int(np.argmin(gaps))  # ties resolve to the first pair
        segments[i:i + 2] = [(segments[i][0], segments[i + 1][1])]

    bin_to_cluster = np.full(HIST_BINS, -1, dtype=np.int32)
    for ci, (a, b) in enumerate(segments):
        bin_to_cluster[occ[a:b]] = ci
    labels[valid] = bin_to_cluster[bins[valid]]
    return labels


def build_layers(rgb: DenseMap, disparity: DisparityMap, labels: np.ndarray) -> Ldi:
    """Split an RGB-D image into one layer per cluster, ordered near to far."""
    ids = np.unique(labels[labels >= 0])
    if ids.size == 0:
        raise LdiError("labels cover no valid pixels")

    entries = []
    for cid in ids:
        mask = labels == cid
        entries.append((float(disparity.values[mask].mean()), mask))
    entries.sort(key=lambda e: -e[0])  # nearest (largest disparity) first

    layers = []
    for index, (_, mask) in enumerate(entries):
        color = rgb.data.copy()
        color[:, :, 3] = mask.astype(np.float32)
        color[~mask] = 0.0
        disp = np.where(mask, disparity.values, 0.0).astype(np.float32)
        layers.append(LdiLayer(color=color, disparity=disp,
                               origin_mask=mask.copy(), layer_index=index))
    return Ldi(layers=layers)


def inpaint_region(ldi: Ldi, layer_index: int, margin_px: int) -> tuple[np.ndarray, np.ndarray]:
    """Masks steering the fill of one layer.

    The context is everything observed from this layer back to the farthest
    one (nearer layers are irrelevant foreground for this fill). The inpaint
    target is the margin around this layer's observed support, minus that
    context.
    """
    if not 0 <= layer_index < len(ldi):
        raise IndexError("layer index out of range")
    context = np.zeros(ldi.shape, dtype=bool)
    for layer in ldi.layers[layer_index:]:
        context |= layer.origin_mask
    support = ldi.layers[layer_index].origin_mask
    size = 2 * margin_px + 1
    dilated = ndimage.maximum_filter(support.astype(np.uint8), size=size) > 0
    return context, dilated & ~context


def inpaint_layer(layer: LdiLayer, context_mask: np.ndarray, inpaint_mask: np.ndarray,
                  ldi: Ldi) -> LdiLayer:
    """Fill a layer's inpaint region from the context layers.

    Color and disparity are diffused by push-pull seeded only from observed
    context pixels. Filled pixels whose depth would exceed the layer's
    maximum observed depth are discarded so the fill can never occlude
    farther layers.
    """
    if not np.any(context_mask):
        return layer
    if np.any(inpaint_mask & layer.origin_mask):
        raise ValueError("inpaint mask overlaps observed pixels")

    # Origin masks are disjoint across layers, so summation assembles the
    # context RGBD without blending.
    ctx_rgb = np.zeros(layer.color[:, :, :3].shape, dtype=np.float32)
    ctx_disp = np.zeros(layer.disparity.shape, dtype=np.float32)
    for other in ldi.layers[layer.layer_index:]:
        sel = other.origin_mask
        ctx_rgb[sel] = other.color[sel, :3]
        ctx_disp[sel] = other.disparity[sel]

    seeds = np.concatenate([ctx_rgb, ctx_disp[:, :, None]], axis=2)
    filled = push_pull(seeds, context_mask.astype(np.float32))
    fill_rgb, fill_disp = filled[:, :, :3], filled[:, :, 3]

    # Depth clamp: disparity >= the layer's minimum observed disparity
    # guarantees depth <= its maximum observed depth.
    min_disp = layer.min_observed_disparity()
    survivors = inpaint_mask & (fill_disp >= min_disp) & (fill_disp > 0)

    color = layer.color.copy()
    color[survivors, :3] = fill_rgb[survivors]
    color[survivors, 3] = 1.0
    disp = layer.disparity.copy()
    disp[survivors] = fill_disp[survivors]
    return replace(layer, color=color, disparity=disp)


def default_margin(width: int, height: int) -> int:
    return int(math.ceil(0.05 * min(width, height)))


def build_inpainted_ldi(rgb: DenseMap, disparity: DisparityMap, threshold: float = 0.12,
                        margin_px: int | None = None) -> Ldi:
    """Full LDI construction: cluster, split into layers, inpaint each layer."""
    if margin_px is None:
        margin_px = default_margin(rgb.width, rgb.height)
    labels = cluster_disparity(disparity, threshold)
    ldi = build_layers(rgb, disparity, labels)
    out = []
    for layer in ldi.layers:
        context, target = inpaint_region(ldi, layer.layer_index, margin_px)
        out.append(inpaint_layer(layer, context, target, ldi))
    return Ldi(layers=out)


def dump_ldi(ldi: Ldi, out_dir, image_tag: str) -> list[Path]:
    """Write each layer as ldi_<image>_<layer>.png (RGBA) + .pfm (disparity)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for layer in ldi.layers:
        stem = out_dir / f"ldi_{image_tag}_{layer.layer_index}"
        write_image(stem.with_suffix(".png"), layer.color)
        write_pfm(stem.with_suffix(".pfm"), layer.disparity)
        written += [stem.with_suffix(".png"), stem.with_suffix(".pfm")]
    return written
