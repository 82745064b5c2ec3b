"""Binary frame-feature volumes.

Layout: magic "FVOL", then five little-endian u32 fields (version, N, W, H, D)
followed by N*W*H*D little-endian 32-bit floats, frame-major, row-major.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"FVOL"
VERSION = 1
_HEADER = struct.Struct("<4sIIIII")


class IngestionError(ValueError):
    """A data file does not match the expected schema."""


def write_fvol(path, frames: np.ndarray) -> None:
    frames = np.ascontiguousarray(frames, dtype="<f4")
    if frames.ndim != 4:
        raise IngestionError(f"feature volume must be [N, W, H, D], got shape {frames.shape}")
    n, w, h, d = frames.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, n, w, h, d))
        fh.write(frames.tobytes())


def read_fvol(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise IngestionError(f"{path}: truncated header")
    magic, version, n, w, h, d = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise IngestionError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise IngestionError(f"{path}: unsupported version {version}")
    expected = n * w * h * d * 4
    payload = raw[_HEADER.size:]
    if len(payload) != expected:
        raise IngestionError(f"{path}: payload is {len(payload)} bytes, expected {expected}")
    return np.frombuffer(payload, dtype="<f4").reshape(n, w, h, d).copy()
