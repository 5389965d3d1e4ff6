"""LDIM v1 scene bundle: the interchange file the interactive viewer loads.

Layout, all little-endian, no padding:
    magic  4 bytes  "LDIM"
    u32    version (1)
    f32x9  intrinsics K, row-major
    u32    count0, u32 count1
    then count0 + count1 records of 32 bytes each:
        f32x3 position, u8x4 RGBA, f32x3 scene flow, f32 radius scale
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .render import PointCloud

MAGIC = b"LDIM"
VERSION = 1
RECORD = np.dtype([("pos", "<f4", (3,)), ("rgba", "u1", (4,)),
                   ("flow", "<f4", (3,)), ("radius", "<f4")])
assert RECORD.itemsize == 32


class BundleError(RuntimeError):
    pass


def _pack_cloud(cloud: PointCloud) -> np.ndarray:
    rec = np.zeros(len(cloud), dtype=RECORD)
    rec["pos"] = cloud.xyz.astype(np.float32)
    rec["rgba"] = np.clip(np.round(cloud.color * 255.0), 0, 255).astype(np.uint8)
    rec["flow"] = cloud.u.astype(np.float32)
    rec["radius"] = cloud.r_world.astype(np.float32)
    return rec


def _unpack_cloud(rec: np.ndarray) -> PointCloud:
    return PointCloud(xyz=rec["pos"].astype(np.float64),
                      color=(rec["rgba"].astype(np.float32) / 255.0),
                      u=rec["flow"].astype(np.float64),
                      r_world=rec["radius"].astype(np.float64))


def write_bundle(path: str | Path, cloud0: PointCloud, cloud1: PointCloud,
                 K: np.ndarray) -> None:
    header = struct.pack("<4sI", MAGIC, VERSION)
    header += np.asarray(K, dtype="<f4").reshape(9).tobytes()
    header += struct.pack("<II", len(cloud0), len(cloud1))
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(_pack_cloud(cloud0).tobytes())
        fh.write(_pack_cloud(cloud1).tobytes())


def read_bundle(path: str | Path) -> tuple[PointCloud, PointCloud, np.ndarray]:
    blob = Path(path).read_bytes()
    if len(blob) < 52:
        raise BundleError("truncated bundle header")
    magic, version = struct.unpack_from("<4sI", blob, 0)
    if magic != MAGIC:
        raise BundleError("bad magic: not an LDIM bundle")
    if version != VERSION:
        raise BundleError(f"unsupported bundle version {version}")
    K = np.frombuffer(blob, dtype="<f4", count=9, offset=8).reshape(3, 3)
    n0, n1 = struct.unpack_from("<II", blob, 44)
    expected = 52 + RECORD.itemsize * (n0 + n1)
    if len(blob) != expected:
        raise BundleError(f"bundle size {len(blob)} != expected {expected}")
    rec0 = np.frombuffer(blob, dtype=RECORD, count=n0, offset=52)
    rec1 = np.frombuffer(blob, dtype=RECORD, count=n1, offset=52 + 32 * n0)
    return _unpack_cloud(rec0), _unpack_cloud(rec1), K.astype(np.float64)
