"""Cinematic camera paths through the reconstructed scene."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .camera import Camera

PATH_KINDS = ("zoom", "track", "circle", "static")
TIME_SPECS = ("linear", "sine-loop")


@dataclass(frozen=True)
class CameraPath:
    """Ordered (camera, t) pairs; one output frame each."""

    frames: tuple[tuple[Camera, float], ...]

    def __len__(self) -> int:
        return len(self.frames)

    def __iter__(self):
        return iter(self.frames)


def smoothstep(x: float) -> float:
    """Ease-in-out 3x^2 - 2x^3 on [0, 1]."""
    x = min(max(x, 0.0), 1.0)
    return x * x * (3.0 - 2.0 * x)


def time_schedule(i: int, n: int, spec: str) -> float:
    if spec == "linear":
        return i / (n - 1)
    if spec == "sine-loop":
        return 0.5 - 0.5 * math.cos(2.0 * math.pi * i / (n - 1))
    raise ValueError(f"unknown time spec: {spec}")


def generate_path(kind: str, n: int, amplitude: float, K: np.ndarray,
                  width: int, height: int, time_spec: str = "linear") -> CameraPath:
    """Eased camera trajectory starting at the identity pose.

    Amplitude is in world units (the caller scales it by scene depth).
    zoom moves along +z, track along +x; circle sweeps an ellipse with
    radii (amplitude, amplitude / 2) in the image plane, returning home.
    """
    if kind not in PATH_KINDS:
        raise ValueError(f"unknown path kind: {kind}")
    if n < 2:
        raise ValueError("a path needs at least 2 frames")
    if amplitude < 0:
        raise ValueError("amplitude must be >= 0")

    frames = []
    for i in range(n):
        s = smoothstep(i / (n - 1))
        if kind == "zoom":
            center = np.array([0.0, 0.0, amplitude * s])
        elif kind == "track":
            center = np.array([amplitude * s, 0.0, 0.0])
        elif kind == "circle":
            theta = 2.0 * math.pi * s
            center = np.array([amplitude * math.sin(theta),
                               0.5 * amplitude * (1.0 - math.cos(theta)), 0.0])
        else:
            center = np.zeros(3)
        cam = Camera(K=K, R=np.eye(3), t=-center, width=width, height=height)
        frames.append((cam, time_schedule(i, n, time_spec)))
    return CameraPath(frames=tuple(frames))
