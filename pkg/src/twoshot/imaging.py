"""Dense raster containers and file I/O (PNG, PFM, Middlebury .flo).

Everything downstream operates on float32 rasters of shape (H, W, C):
RGBA images, single-channel disparity, two-channel optical flow, masks.
Loaders guarantee finite values; sporadic NaN/Inf entries in disparity
files are mapped to the invalid mask rather than rejected wholesale.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

FLO_MAGIC = 202021.25


class RasterIOError(RuntimeError):
    """A raster file could not be decoded (bad header, truncation, ...)."""


@dataclass(frozen=True)
class DenseMap:
    """Row-major H x W x C float32 raster, immutable after construction."""

    data: np.ndarray

    def __post_init__(self):
        if self.data.ndim != 3:
            raise ValueError(f"DenseMap expects (H, W, C) data, got shape {self.data.shape}")
        if self.data.dtype != np.float32:
            object.__setattr__(self, "data", self.data.astype(np.float32))
        if not np.all(np.isfinite(self.data)):
            raise ValueError("DenseMap values must be finite")
        self.data.setflags(write=False)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class DisparityMap:
    """Inverse depth (1/meter up to unknown scale) with a validity mask.

    Valid entries are finite and strictly positive; everything else is
    masked out and must not be consumed downstream.
    """

    values: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        if self.values.ndim != 2 or self.valid.shape != self.values.shape:
            raise ValueError("DisparityMap expects matching 2-D values and mask")
        if self.values.dtype != np.float32:
            object.__setattr__(self, "values", self.values.astype(np.float32))
        if self.valid.dtype != bool:
            object.__setattr__(self, "valid", self.valid.astype(bool))
        bad = self.valid & ~(np.isfinite(self.values) & (self.values > 0))
        if np.any(bad):
            raise ValueError("valid disparities must be finite and > 0")
        self.values.setflags(write=False)
        self.valid.setflags(write=False)

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]


def sanitize_disparity(values: np.ndarray) -> DisparityMap:
    """Build a DisparityMap, masking non-finite and non-positive entries."""
    values = np.asarray(values, dtype=np.float32)
    valid = np.isfinite(values) & (values > 0)
    values = np.where(valid, values, 0.0).astype(np.float32)
    return DisparityMap(values=values, valid=valid)


# ---------------------------------------------------------------------------
# PNG
# ---------------------------------------------------------------------------

def read_image(path) -> DenseMap:
    """Load an 8/16-bit PNG as an RGBA float32 map with values in [0, 1].

    Grayscale images are replicated to RGB; an opaque alpha channel is
    appended when the file has none.
    """
    try:
        with Image.open(path) as im:
            im.load()
            mode = im.mode
            if mode == "P":
                im = im.convert("RGBA")
                mode = "RGBA"
            arr = np.asarray(im)
    except (OSError, SyntaxError) as exc:
        raise RasterIOError(f"unreadable file: {path}: {exc}") from exc

    if arr.dtype == np.uint8:
        scale = 255.0
    elif arr.dtype in (np.uint16, np.int32):
        scale = 65535.0
    else:
        raise RasterIOError(f"unsupported bit depth in {path}: {arr.dtype}")

    data = arr.astype(np.float32) / scale
    if data.ndim == 2:
        data = np.repeat(data[:, :, None], 3, axis=2)
    if data.shape[2] == 2:  # LA
        data = np.concatenate([np.repeat(data[:, :, :1], 3, axis=2), data[:, :, 1:]], axis=2)
    if data.shape[2] == 3:
        alpha = np.ones_like(data[:, :, :1])
        data = np.concatenate([data, alpha], axis=2)
    if data.shape[2] != 4:
        raise RasterIOError(f"unsupported channel count in {path}: {data.shape[2]}")
    return DenseMap(np.clip(data, 0.0, 1.0))


def write_image(path, image, bit_depth: int = 8) -> None:
    """Write an RGB(A) or grayscale float map in [0, 1] as a PNG.

    16-bit output is supported for single-channel maps only.
    """
    data = image.data if isinstance(image, DenseMap) else np.asarray(image, dtype=np.float32)
    if data.ndim == 2:
        data = data[:, :, None]
    data = np.clip(data, 0.0, 1.0)
    if bit_depth == 8:
        arr = np.round(data * 255.0).astype(np.uint8)
        if arr.shape[2] == 1:
            im = Image.fromarray(arr[:, :, 0], mode="L")
        elif arr.shape[2] == 3:
            im = Image.fromarray(arr, mode="RGB")
        elif arr.shape[2] == 4:
            im = Image.fromarray(arr, mode="RGBA")
        else:
            raise ValueError(f"cannot encode {arr.shape[2]}-channel image")
    elif bit_depth == 16:
        if data.shape[2] != 1:
            raise ValueError("16-bit PNG output supports single-channel maps only")
        arr = np.round(data[:, :, 0] * 65535.0).astype(np.uint16)
        im = Image.fromarray(arr)
    else:
        raise ValueError(f"unsupported bit depth {bit_depth}")
    im.save(Path(path), format="PNG")


# ---------------------------------------------------------------------------
# PFM (Portable Float Map, grayscale "Pf" or color "PF")
# ---------------------------------------------------------------------------

def _read_pfm_token(f) -> bytes:
    # Tokens are separated by arbitrary whitespace.
    tok = b""
    while True:
        c = f.read(1)
        if not c:
            raise RasterIOError("truncated PFM header")
        if c.isspace():
            if tok:
                return tok
            continue
        tok += c


def read_pfm(path) -> np.ndarray:
    """Read a PFM file as (H, W) or (H, W, 3) float32, row 0 at the top.

    PFM stores rows bottom-up; the sign of the scale field selects the
    byte order (negative = little-endian). The scale magnitude is ignored.
    """
    with open(path, "rb") as f:
        magic = _read_pfm_token(f)
        if magic == b"Pf":
            channels = 1
        elif magic == b"PF":
            channels = 3
        else:
            raise RasterIOError(f"malformed PFM header in {path}: magic {magic!r}")
        try:
            width = int(_read_pfm_token(f))
            height = int(_read_pfm_token(f))
            scale = float(_read_pfm_token(f))
        except ValueError as exc:
            raise RasterIOError(f"malformed PFM header in {path}") from exc
        if width <= 0 or height <= 0 or scale == 0:
            raise RasterIOError(f"malformed PFM header in {path}")
        endian = "<" if scale < 0 else ">"
        count = width * height * channels
        buf = f.read(count * 4)
        if len(buf) != count * 4:
            raise RasterIOError(f"truncated PFM data in {path}")
    data = np.frombuffer(buf, dtype=endian + "f4").astype(np.float32)
    data = data.reshape(height, width, channels)
    data = np.flipud(data)
    return data[:, :, 0] if channels == 1 else data


def write_pfm(path, data: np.ndarray) -> None:
    """Write (H, W) or (H, W, 3) float32 data as a little-endian PFM."""
    data = np.asarray(data, dtype=np.float32)
    if data.ndim == 3 and data.shape[2] == 1:
        data = data[:, :, 0]
    if data.ndim == 2:
        magic, flat = b"Pf", np.flipud(data)
    elif data.ndim == 3 and data.shape[2] == 3:
        magic, flat = b"PF", np.flipud(data)
    else:
        raise ValueError(f"PFM supports 1 or 3 channels, got shape {data.shape}")
    with open(path, "wb") as f:
        f.write(magic + b"\n")
        f.write(f"{data.shape[1]} {data.shape[0]}\n".encode())
        f.write(b"-1.0\n")
        f.write(np.ascontiguousarray(flat, dtype="<f4").tobytes())


def read_disparity(path) -> DisparityMap:
    """Load a grayscale PFM as disparity; <=0 and non-finite become invalid."""
    data = read_pfm(path)
    if data.ndim != 2:
        raise RasterIOError(f"disparity PFM must be grayscale: {path}")
    disp = sanitize_disparity(data)
    if not np.any(disp.valid):
        raise RasterIOError(f"all-invalid disparity map: {path}")
    return disp


def write_disparity(path, disparity: DisparityMap) -> None:
    """Write disparity as grayscale PFM; invalid pixels are stored as 0."""
    out = np.where(disparity.valid, disparity.values, 0.0).astype(np.float32)
    write_pfm(path, out)


# ---------------------------------------------------------------------------
# Middlebury .flo
# ---------------------------------------------------------------------------

def read_flow(path) -> DenseMap:
    """Read a Middlebury .flo file as an (H, W, 2) displacement map in pixels."""
    with open(path, "rb") as f:
        head = f.read(12)
        if len(head) != 12:
            raise RasterIOError(f"truncated .flo header in {path}")
        magic, width, height = struct.unpack("<fii", head)
        if magic != FLO_MAGIC:
            raise RasterIOError(f"bad magic in {path}: {magic} != {FLO_MAGIC}")
        if width <= 0 or height <= 0:
            raise RasterIOError(f"bad dimensions in {path}: {width}x{height}")
        count = width * height * 2
        buf = f.read(count * 4)
        if len(buf) != count * 4:
            raise RasterIOError(f"truncated .flo data in {path}")
    data = np.frombuffer(buf, dtype="<f4").reshape(height, width, 2)
    return DenseMap(np.ascontiguousarray(data))


def write_flow(path, flow) -> None:
    data = flow.data if isinstance(flow, DenseMap) else np.asarray(flow, dtype=np.float32)
    if data.ndim != 3 or data.shape[2] != 2:
        raise ValueError(f".flo expects (H, W, 2) data, got {data.shape}")
    with open(path, "wb") as f:
        f.write(struct.pack("<fii", FLO_MAGIC, data.shape[1], data.shape[0]))
        f.write(np.ascontiguousarray(data, dtype="<f4").tobytes())


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------

def sample_bilinear(data: np.ndarray, xs, ys) -> np.ndarray:
    """Bilinear sampling of (H, W[, C]) data with clamp-to-edge borders.

    `xs`/`ys` may be scalars or arrays of any matching shape; the result
    has that shape plus the channel axis when present.
    """
    squeeze = data.ndim == 2
    if squeeze:
        data = data[:, :, None]
    h, w = data.shape[:2]
    xs = np.clip(np.asarray(xs, dtype=np.float64), 0.0, w - 1.0)
    ys = np.clip(np.asarray(ys, dtype=np.float64), 0.0, h - 1.0)
    x0 = np.floor(xs).astype(np.intp)
    y0 = np.floor(ys).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (xs - x0).astype(np.float32)[..., None]
    fy = (ys - y0).astype(np.float32)[..., None]
    top = data[y0, x0] * (1.0 - fx) + data[y0, x1] * fx
    bot = data[y1, x0] * (1.0 - fx) + data[y1, x1] * fx
    out = top * (1.0 - fy) + bot * fy
    return out[..., 0] if squeeze else out


def bilinear_sample(dense_map: DenseMap, x: float, y: float) -> np.ndarray:
    """Sample a DenseMap at one (x, y) location; coordinates clamp to borders."""
    return sample_bilinear(dense_map.data, x, y)
