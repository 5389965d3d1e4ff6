"""Pyramid push-pull fill for sparsely defined rasters.

Downsamples values with their weights until everything is covered, then
pulls coarse averages back up into the undefined pixels. Defined pixels
are never touched, and every filled value is a convex combination of the
seed values, so per-channel min/max bounds are preserved.
"""

from __future__ import annotations

import numpy as np

from .imaging import sample_bilinear


def _downsample(values: np.ndarray, weights: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    h, w = weights.shape
    ph, pw = (h + 1) // 2 * 2, (w + 1) // 2 * 2
    if (ph, pw) != (h, w):
        values = np.pad(values, ((0, ph - h), (0, pw - w), (0, 0)))
        weights = np.pad(weights, ((0, ph - h), (0, pw - w)))
    vw = values * weights[:, :, None]
    vsum = vw.reshape(ph // 2, 2, pw // 2, 2, -1).sum(axis=(1, 3))
    wsum = weights.reshape(ph // 2, 2, pw // 2, 2).sum(axis=(1, 3))
    out = vsum / np.maximum(wsum, 1e-20)[:, :, None]
    out[wsum <= 0] = 0.0
    return out.astype(np.float32), wsum.astype(np.float32)


def _upsample_to(values: np.ndarray, h: int, w: int) -> np.ndarray:
    # Coarse pixel (I, J) sits at fine coordinates (2J + 0.5, 2I + 0.5).
    ys, xs = np.mgrid[0:h, 0:w]
    return sample_bilinear(values, (xs - 0.5) / 2.0, (ys - 0.5) / 2.0)


def push_pull(values: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Fill pixels with weight 0 from the weighted pyramid of seeded pixels.

    Args:
        values: (H, W, C) float raster; entries where weight == 0 are ignored.
        weights: (H, W) non-negative seed weights; larger weights dominate
            the coarse averages.

    Returns:
        (H, W, C) raster equal to `values` wherever weight > 0, filled
        everywhere else. Requires at least one positive weight.
    """
    values = np.asarray(values, dtype=np.float32)
    weights = np.asarray(weights, dtype=np.float32)
    if values.ndim != 3 or weights.shape != values.shape[:2]:
        raise ValueError("push_pull expects (H, W, C) values and (H, W) weights")
    if not np.any(weights > 0):
        raise ValueError("push_pull needs at least one seeded pixel")

    levels = [(values, weights)]
    while levels[-1][1].shape[0] > 1 or levels[-1][1].shape[1] > 1:
        levels.append(_downsample(*levels[-1]))

    filled = levels[-1][0]
    for v, w in reversed(levels[:-1]):
        up = _upsample_to(filled, v.shape[0], v.shape[1])
        hole = w <= 0
        out = v.copy()
        out[hole] = up[hole]
        filled = out
    return filled
