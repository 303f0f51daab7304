"""
Binary field snapshots ("BKF1")

Layout: magic b"BKF1", nx and ny as little-endian int32, spacing and origin
as little-endian float64, then interleaved re/im float64 samples, row-major.
"""
import struct
from pathlib import Path
from typing import Union

import numpy as np

from src.fields.field_core import Grid2, ScalarField

MAGIC = b"BKF1"
_HEADER = struct.Struct("<4sii3d")


def snapshot_bytes(f: ScalarField) -> bytes:
    g = f.grid
    header = _HEADER.pack(MAGIC, g.nx, g.ny, g.spacing, g.origin[0], g.origin[1])
    return header + f.samples.astype("<c16").tobytes(order="C")


def write_snapshot(f: ScalarField, path: Union[str, Path]) -> Path:
    """Write a field snapshot and return its path"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(snapshot_bytes(f))
    return path


def read_snapshot(path: Union[str, Path]) -> ScalarField:
    """Read a field snapshot written by write_snapshot"""
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ValueError(f"{path}: truncated snapshot header")
    magic, nx, ny, spacing, ox, oy = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    expected = _HEADER.size + 16 * nx * ny
    if len(data) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, found {len(data)}")
    samples = np.frombuffer(data, dtype="<c16", offset=_HEADER.size).reshape(ny, nx)
    return ScalarField(Grid2((ox, oy), spacing, nx, ny), samples)
