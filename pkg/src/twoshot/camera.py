"""Pinhole camera model shared by lifting, rendering, and path generation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Camera:
    """Pinhole camera: intrinsics K plus a world-to-camera rigid transform."""

    K: np.ndarray           # (3, 3) float64
    R: np.ndarray = field(default_factory=lambda: np.eye(3))
    t: np.ndarray = field(default_factory=lambda: np.zeros(3))
    width: int = 0
    height: int = 0

    def __post_init__(self):
        k = np.asarray(self.K, dtype=np.float64)
        r = np.asarray(self.R, dtype=np.float64)
        tv = np.asarray(self.t, dtype=np.float64).reshape(3)
        if k.shape != (3, 3) or r.shape != (3, 3):
            raise ValueError("K and R must be 3x3")
        if not (k[0, 0] > 0 and k[1, 1] > 0):
            raise ValueError("focal lengths must be positive")
        if np.abs(r @ r.T - np.eye(3)).max() > 1e-6:
            raise ValueError("rotation must be orthonormal")
        for name, arr in (("K", k), ("R", r), ("t", tv)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def fx(self) -> float:
        return float(self.K[0, 0])

    @property
    def fy(self) -> float:
        return float(self.K[1, 1])

    def world_to_camera(self, points: np.ndarray) -> np.ndarray:
        """Transform (..., 3) world points into camera coordinates."""
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.R.T + self.t

    def project(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Project (..., 3) world points.

        Returns:
            (pixels (..., 2), z (...,)) where z is camera-frame depth;
            pixels are meaningless where z <= 0.
        """
        cam = self.world_to_camera(points)
        z = cam[..., 2]
        safe = np.where(z > 0, z, 1.0)
        uvw = cam @ self.K.T
        return uvw[..., :2] / safe[..., None], z

    def with_pose(self, R: np.ndarray, t: np.ndarray) -> "Camera":
        return Camera(K=self.K, R=R, t=t, width=self.width, height=self.height)


def intrinsics_from_fov(width: int, height: int, fov_deg: float = 55.0) -> np.ndarray:
    """Square-pixel K for a horizontal field of view, principal point centered."""
    if not 0 < fov_deg < 180:
        raise ValueError("fov must be in (0, 180) degrees")
    f = 0.5 * width / math.tan(math.radians(fov_deg) / 2)
    cx, cy = (width - 1) / 2.0, (height - 1) / 2.0
    return np.array([[f, 0, cx], [0, f, cy], [0, 0, 1]], dtype=np.float64)


def reference_camera(K: np.ndarray, width: int, height: int) -> Camera:
    """The identity-pose camera both inputs share after alignment."""
    return Camera(K=K, width=width, height=height)


def unproject(pixels: np.ndarray, z: np.ndarray, K: np.ndarray) -> np.ndarray:
    """Lift (..., 2) pixels at depth z to 3D: z * K^-1 * (x, y, 1)."""
    pts = np.asarray(pixels, dtype=np.float64)
    zz = np.asarray(z, dtype=np.float64)
    kinv = np.linalg.inv(np.asarray(K, dtype=np.float64))
    ones = np.ones(pts.shape[:-1] + (1,))
    rays = np.concatenate([pts, ones], axis=-1) @ kinv.T
    return rays * zz[..., None]
