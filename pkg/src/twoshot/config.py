"""Pipeline configuration: YAML file plus command-line overrides."""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np
import yaml

from .camera import intrinsics_from_fov
from .paths import PATH_KINDS, TIME_SPECS


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    """Every knob of the end-to-end run; defaults match the documented ones."""

    image0: str = ""
    image1: str = ""
    disparity0: str = ""
    disparity1: str = ""
    flow01: str = ""
    flow10: str = ""
    output_dir: str = "out"

    # Intrinsics: explicit fx/fy/cx/cy wins over the field-of-view default.
    fov: float = 55.0
    fx: float | None = None
    fy: float | None = None
    cx: float | None = None
    cy: float | None = None

    cluster_threshold: float = 0.12
    inpaint_margin: int | None = None
    static_keep_fraction: float = 0.6
    tau: float = 1.0
    beta: float = 10.0
    base_radius_px: float = 1.7
    band: float = 0.05
    alpha_z: float = 60.0

    path_kind: str = "zoom"
    frames: int = 30
    amplitude: float = 0.05
    time_spec: str = "linear"
    seed: int = 0

    dump_intermediates: bool = False

    def __post_init__(self):
        if self.frames < 2:
            raise ConfigError("frames must be >= 2")
        if self.amplitude < 0:
            raise ConfigError("amplitude must be >= 0")
        if self.path_kind not in PATH_KINDS:
            raise ConfigError(f"path_kind must be one of {PATH_KINDS}")
        if self.time_spec not in TIME_SPECS:
            raise ConfigError(f"time_spec must be one of {TIME_SPECS}")
        explicit = [self.fx, self.fy, self.cx, self.cy]
        if any(v is not None for v in explicit) and any(v is None for v in explicit):
            raise ConfigError("explicit intrinsics need all of fx, fy, cx, cy")

    def intrinsics(self, width: int, height: int) -> np.ndarray:
        if self.fx is not None:
            return np.array([[self.fx, 0, self.cx], [0, self.fy, self.cy],
                             [0, 0, 1]], dtype=np.float64)
        return intrinsics_from_fov(width, height, self.fov)

    def input_paths(self) -> dict[str, str]:
        return {"image0": self.image0, "image1": self.image1,
                "disparity0": self.disparity0, "disparity1": self.disparity1,
                "flow01": self.flow01, "flow10": self.flow10}

    def echo(self) -> dict:
        """Plain-dict view of every effective parameter, for the manifest."""
        return {f.name: getattr(self, f.name) for f in fields(self)}


def load_config(path: str | Path | None = None, **overrides) -> PipelineConfig:
    """Build a config from an optional YAML file plus keyword overrides."""
    data: dict = {}
    if path is not None:
        raw = yaml.safe_load(Path(path).read_text())
        if raw is None:
            raw = {}
        if not isinstance(raw, dict):
            raise ConfigError("config file must hold a mapping")
        data.update(raw)
    data.update({k: v for k, v in overrides.items() if v is not None})

    known = {f.name for f in fields(PipelineConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        return PipelineConfig(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def with_overrides(cfg: PipelineConfig, **overrides) -> PipelineConfig:
    return replace(cfg, **{k: v for k, v in overrides.items() if v is not None})
