"""The shared binary matrix format and vocabulary sidecar.

Layout: magic b"MMAP", version byte 0x01, rows then cols as unsigned
32-bit little-endian, then rows*cols float32 little-endian, row-major.
Implemented here independently of the consumer package; the bytes on
disk are the contract.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"MMAP"
VERSION = 0x01
_HEADER = struct.Struct("<4sBII")


class FormatError(ValueError):
    pass


def write_matrix(path, matrix: np.ndarray) -> None:
    matrix = np.asarray(matrix, dtype=np.float32)
    if matrix.ndim != 2:
        raise FormatError(f"expected a 2-D matrix, got shape {matrix.shape}")
    header = _HEADER.pack(MAGIC, VERSION, matrix.shape[0], matrix.shape[1])
    Path(path).write_bytes(header + np.ascontiguousarray(matrix).astype("<f4").tobytes())


def read_matrix(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise FormatError(f"truncated header: {len(data)} bytes")
    magic, version, rows, cols = _HEADER.unpack_from(data)
    if magic != MAGIC or version != VERSION:
        raise FormatError(f"bad magic/version {magic!r}/{version}")
    if len(data) != _HEADER.size + 4 * rows * cols:
        raise FormatError(f"size mismatch: {len(data)} bytes for {rows}x{cols}")
    return np.frombuffer(data, dtype="<f4", offset=_HEADER.size).reshape(rows, cols)


def write_vocabulary(path, words: list[str]) -> None:
    Path(path).write_text("".join(w + "\n" for w in words), encoding="utf-8")


def read_vocabulary(path) -> list[str]:
    return [ln for ln in Path(path).read_text(encoding="utf-8").splitlines() if ln]
