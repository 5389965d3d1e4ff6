"""Registration of the photo pair into a single reference frame.

The second photo is warped onto the first with a homography estimated
from optical-flow correspondences in static regions, after which its
disparities are brought into the first photo's range by a global scale
and shift. Both cameras are treated as identical from then on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .imaging import DenseMap, DisparityMap, sample_bilinear, sanitize_disparity


class AlignmentError(RuntimeError):
    """Alignment could not be established from the given flow."""


@dataclass(frozen=True)
class Homography:
    """3x3 projective map from reference (image 0) to image 1 pixels, h33 = 1."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.shape != (3, 3):
            raise ValueError("homography must be 3x3")
        if abs(m[2, 2]) < 1e-12 or abs(np.linalg.det(m / m[2, 2])) < 1e-10:
            raise ValueError("homography is singular")
        object.__setattr__(self, "matrix", m / m[2, 2])
        self.matrix.setflags(write=False)

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Map (..., 2) pixel coordinates through the homography."""
        pts = np.asarray(points, dtype=np.float64)
        ones = np.ones(pts.shape[:-1] + (1,))
        ph = np.concatenate([pts, ones], axis=-1)
        q = ph @ self.matrix.T
        return q[..., :2] / q[..., 2:3]

    def inverse(self) -> "Homography":
        return Homography(np.linalg.inv(self.matrix))


@dataclass(frozen=True)
class CorrespondenceSet:
    """Matched pixel pairs (p0 in image 0, p1 in image 1) with weights in [0, 1]."""

    p0: np.ndarray
    p1: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        for name in ("p0", "p1", "weights"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        if self.p0.shape != self.p1.shape or self.p0.ndim != 2 or self.p0.shape[1] != 2:
            raise ValueError("correspondences must be (N, 2) point arrays")
        if self.weights.shape != (len(self.p0),):
            raise ValueError("weights must be (N,)")
        if np.any((self.weights < 0) | (self.weights > 1)):
            raise ValueError("weights must lie in [0, 1]")

    def __len__(self) -> int:
        return len(self.p0)


@dataclass(frozen=True)
class DisparityAlignment:
    """Global scale/shift mapping image 1 disparities into image 0's range."""

    scale: float
    shift: float

    def __post_init__(self):
        if not (self.scale > 0):
            raise ValueError("scale must be > 0")

    def apply(self, disparity: DisparityMap) -> DisparityMap:
        values = self.scale * disparity.values + self.shift
        values = np.where(disparity.valid, values, 0.0)
        return sanitize_disparity(values)


def static_mask(flow01: DenseMap, keep_fraction: float = 0.6) -> np.ndarray:
    """Mask of probable static pixels: flow magnitude below the keep quantile.

    Keeps the ceil(keep_fraction * N) smallest magnitudes (more on ties),
    rejecting large-flow regions that usually correspond to moving objects.
    """
    if not 0.0 < keep_fraction < 1.0:
        raise ValueError("keep_fraction must be in (0, 1)")
    mag = np.hypot(flow01.data[:, :, 0], flow01.data[:, :, 1])
    flat = mag.ravel()
    k = int(math.ceil(keep_fraction * flat.size))
    threshold = np.partition(flat, k - 1)[k - 1]
    return mag <= threshold


def correspondences_from_flow(flow01: DenseMap, mask: np.ndarray,
                              stride: int = 4) -> CorrespondenceSet:
    """Turn forward flow into (p, p + flow(p)) matches on a stride grid.

    Only masked pixels whose flow target lands inside the image survive.
    """
    h, w = flow01.height, flow01.width
    if mask.shape != (h, w):
        raise ValueError("mask dimensions must match the flow")
    ys, xs = np.mgrid[0:h:stride, 0:w:stride]
    keep = mask[ys, xs]
    xs, ys = xs[keep], ys[keep]
    dx = flow01.data[ys, xs, 0]
    dy = flow01.data[ys, xs, 1]
    tx, ty = xs + dx, ys + dy
    inb = (tx >= 0) & (tx <= w - 1) & (ty >= 0) & (ty <= h - 1)
    p0 = np.stack([xs[inb], ys[inb]], axis=1).astype(np.float64)
    p1 = np.stack([tx[inb], ty[inb]], axis=1)
    if len(p0) < 4:
        raise AlignmentError("insufficient static support")
    return CorrespondenceSet(p0=p0, p1=p1, weights=np.ones(len(p0)))


# ---------------------------------------------------------------------------
# Homography estimation (RANSAC + normalized DLT)
# ---------------------------------------------------------------------------

def _normalization(points: np.ndarray) -> np.ndarray:
    """Similarity transform taking points to zero mean, sqrt(2) mean norm."""
    c = points.mean(axis=0)
    d = np.sqrt(((points - c) ** 2).sum(axis=1)).mean()
    s = math.sqrt(2.0) / max(d, 1e-12)
    return np.array([[s, 0, -s * c[0]], [0, s, -s * c[1]], [0, 0, 1]])


def _apply_h(m: np.ndarray, pts: np.ndarray) -> np.ndarray:
    ph = np.c_[pts, np.ones(len(pts))]
    q = ph @ m.T
    return q[:, :2] / q[:, 2:3]


def _dlt(p0: np.ndarray, p1: np.ndarray) -> np.ndarray | None:
    """Normalized direct linear transform; None on degenerate systems."""
    t0, t1 = _normalization(p0), _normalization(p1)
    a = _apply_h(t0, p0)
    b = _apply_h(t1, p1)
    n = len(a)
    rows = np.zeros((2 * n, 9))
    rows[0::2] = np.c_[a, np.ones(n), np.zeros((n, 3)), -b[:, :1] * a, -b[:, :1]]
    rows[1::2] = np.c_[np.zeros((n, 3)), a, np.ones(n), -b[:, 1:] * a, -b[:, 1:]]
    if np.linalg.matrix_rank(rows) < 8:
        return None
    # The minimal 8x9 system needs the full V to expose the null-space
    # vector; the reduced SVD is kept for tall refit systems where a full
    # U would be enormous.
    _, _, vt = np.linalg.svd(rows, full_matrices=rows.shape[0] < rows.shape[1])
    hn = vt[-1].reshape(3, 3)
    if abs(hn[2, 2]) < 1e-12:
        return None
    m = np.linalg.inv(t1) @ hn @ t0
    if abs(m[2, 2]) < 1e-12:
        return None
    return m / m[2, 2]


def _symmetric_transfer_error(m: np.ndarray, p0: np.ndarray, p1: np.ndarray) -> np.ndarray:
    inv = np.linalg.inv(m)
    fwd = _apply_h(m, p0) - p1
    bwd = _apply_h(inv, p1) - p0
    return np.sqrt((fwd ** 2).sum(axis=1) + (bwd ** 2).sum(axis=1))


def _noncollinear(pts: np.ndarray, eps: float = 1e-6) -> bool:
    a, b, c, d = pts

    def area(p, q, r):
        u, v = q - p, r - p
        return 0.5 * abs(u[0] * v[1] - u[1] * v[0])

    return max(area(a, b, c), area(a, b, d), area(a, c, d), area(b, c, d)) > eps


def estimate_homography(corrs: CorrespondenceSet, seed: int = 0,
                        threshold: float = 1.5, max_iters: int = 2000,
                        confidence: float = 0.999,
                        min_inlier_ratio: float = 0.3) -> Homography:
    """Robust homography fit from correspondences.

    Random-sample consensus over 4-point minimal sets with normalized DLT,
    1.5 px symmetric-transfer inlier threshold, then a DLT refit on all
    inliers. Deterministic for a fixed seed.

    Raises AlignmentError on degenerate support or an inlier ratio < 0.3.
    """
    n = len(corrs)
    if n < 4:
        raise AlignmentError("need at least 4 correspondences")
    p0, p1 = corrs.p0, corrs.p1
    rng = np.random.default_rng(seed)

    best_inliers = None
    best_count = 0
    needed = max_iters
    it = 0
    while it < min(max_iters, needed):
        it += 1
        idx = rng.choice(n, size=4, replace=False)
        if not (_noncollinear(p0[idx]) and _noncollinear(p1[idx])):
            continue
        m = _dlt(p0[idx], p1[idx])
        if m is None:
            continue
        err = _symmetric_transfer_error(m, p0, p1)
        inliers = err < threshold
        count = int(inliers.sum())
        if count > best_count:
            best_count = count
            best_inliers = inliers
            ratio = count / n
            if ratio > 0:
                denom = math.log(max(1.0 - ratio ** 4, 1e-12))
                if denom < 0:
                    needed = min(max_iters, int(math.ceil(math.log(1.0 - confidence) / denom)))

    if best_inliers is None or best_count < 4:
        raise AlignmentError("degenerate correspondence support")
    if best_count / n < min_inlier_ratio:
        raise AlignmentError(f"alignment failed: inlier ratio {best_count / n:.2f} < {min_inlier_ratio}")

    refit = _dlt(p0[best_inliers], p1[best_inliers])
    if refit is None:
        raise AlignmentError("degenerate correspondence support")
    return Homography(refit)


def warp_to_reference(image1: DenseMap, disparity1: DisparityMap, flow10: DenseMap,
                      h: Homography) -> tuple[DenseMap, DisparityMap, DenseMap, np.ndarray]:
    """Inverse-warp image 1 and its disparity/backward flow into the reference frame.

    Every reference pixel p samples image 1 at H(p) bilinearly. Pixels whose
    source falls outside image 1 (or lands on invalid disparity) are flagged
    in the returned validity mask. Backward flow vectors are re-expressed so
    they keep pointing at the matching image-0 pixel from the aligned grid.

    Returns:
        (aligned image, aligned disparity, aligned backward flow, valid mask)
    """
    hgt, wid = image1.height, image1.width
    ys, xs = np.mgrid[0:hgt, 0:wid].astype(np.float64)
    src = h.apply(np.stack([xs, ys], axis=-1))
    sx, sy = src[..., 0], src[..., 1]
    # Samples within half a pixel of the frame are still inside the border
    # pixel's support; clamp-to-edge sampling handles them. Without the
    # skirt a near-identity homography would invalidate the whole border.
    inside = ((sx >= -0.5) & (sx <= wid - 0.5) &
              (sy >= -0.5) & (sy <= hgt - 0.5))

    img = sample_bilinear(image1.data, sx, sy)
    img[~inside] = 0.0

    # Disparity needs all four sampled neighbors valid; partially valid
    # support would blend garbage values in.
    vfrac = sample_bilinear(disparity1.valid.astype(np.float32), sx, sy)
    dvals = sample_bilinear(np.where(disparity1.valid, disparity1.values, 0.0), sx, sy)
    dvalid = inside & (vfrac >= 1.0 - 1e-6)
    disp = sanitize_disparity(np.where(dvalid, dvals / np.maximum(vfrac, 1e-12), 0.0))

    f10 = sample_bilinear(flow10.data, sx, sy)
    realigned = np.stack([sx, sy], axis=-1) + f10 - np.stack([xs, ys], axis=-1)
    realigned[~inside] = 0.0

    valid = inside & disp.valid
    return (DenseMap(img.astype(np.float32)), disp,
            DenseMap(realigned.astype(np.float32)), valid)


def align_forward_flow(flow01: DenseMap, h: Homography) -> DenseMap:
    """Re-express forward flow so its targets live on the aligned grid.

    The flow files measure displacement into the *original* image 1; after
    warping, content of image 1 at q sits at H^-1(q), so the aligned flow is
    H^-1(p + f01(p)) - p.
    """
    hgt, wid = flow01.height, flow01.width
    ys, xs = np.mgrid[0:hgt, 0:wid].astype(np.float64)
    grid = np.stack([xs, ys], axis=-1)
    targets = h.inverse().apply(grid + flow01.data)
    return DenseMap((targets - grid).astype(np.float32))


def fit_disparity_alignment(d0: DisparityMap, d1_aligned: DisparityMap,
                            corrs: CorrespondenceSet) -> DisparityAlignment:
    """Weighted least-squares (scale, shift) matching d1 to d0 at correspondences.

    Both maps live on the reference grid, so each correspondence is evaluated
    at its image-0 endpoint. Falls back to scale 1 plus a mean shift when the
    d1 samples carry no spread.
    """
    x0, y0 = corrs.p0[:, 0], corrs.p0[:, 1]
    v0 = sample_bilinear(np.where(d0.valid, d0.values, 0.0), x0, y0)
    f0 = sample_bilinear(d0.valid.astype(np.float32), x0, y0)
    v1 = sample_bilinear(np.where(d1_aligned.valid, d1_aligned.values, 0.0), x0, y0)
    f1 = sample_bilinear(d1_aligned.valid.astype(np.float32), x0, y0)
    ok = (f0 >= 1.0 - 1e-6) & (f1 >= 1.0 - 1e-6) & (corrs.weights > 0)
    if int(ok.sum()) < 2:
        raise AlignmentError("need at least 2 correspondences with valid disparity")

    w = corrs.weights[ok]
    x = v1[ok].astype(np.float64)
    y = v0[ok].astype(np.float64)
    wsum = w.sum()
    xm = (w * x).sum() / wsum
    ym = (w * y).sum() / wsum
    var = (w * (x - xm) ** 2).sum()
    # A scale is only identifiable when the d1 samples actually spread;
    # interpolation noise alone (relative std below 0.1%) must not be
    # amplified into a wild slope.
    if var / wsum < (1e-3 * max(abs(xm), 1e-12)) ** 2:
        return DisparityAlignment(scale=1.0, shift=float(ym - xm))
    scale = float((w * (x - xm) * (y - ym)).sum() / var)
    scale = max(scale, 1e-6)
    shift = float(ym - scale * xm)
    return DisparityAlignment(scale=scale, shift=shift)
