"""Embedding-matrix binary format and small text sidecar formats.

Matrix file layout: magic b"MMAP", version byte 0x01, rows and cols as
unsigned 32-bit little-endian, then rows*cols IEEE-754 float32
little-endian, row-major. Vocabulary sidecar: UTF-8 text, one word per
line, line i names row i. Labelings: one integer per line.

All writers go through a write-temp-then-rename step so partially
written files are never observed.
"""

from __future__ import annotations

import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .errors import FormatError, IoError, NumericalError

MAGIC = b"MMAP"
VERSION = 0x01
_HEADER = struct.Struct("<4sBII")


def write_embedding_matrix(path, matrix: np.ndarray) -> None:
    matrix = np.asarray(matrix, dtype=np.float32)
    if matrix.ndim != 2:
        raise FormatError(f"expected a 2-D matrix, got shape {matrix.shape}")
    if matrix.size and not np.all(np.isfinite(matrix)):
        raise NumericalError("matrix contains non-finite values")
    header = _HEADER.pack(MAGIC, VERSION, matrix.shape[0], matrix.shape[1])
    body = np.ascontiguousarray(matrix).astype("<f4").tobytes()
    atomic_write_bytes(path, header + body)


def read_embedding_matrix(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise FormatError(f"truncated header: {len(data)} bytes at offset 0")
    magic, version, rows, cols = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r} at offset 0")
    if version != VERSION:
        raise FormatError(f"unsupported version {version} at offset 4")
    expected = _HEADER.size + 4 * rows * cols
    if len(data) != expected:
        raise FormatError(
            f"expected {expected} bytes, got {len(data)}; truncation at offset {len(data)}"
        )
    flat = np.frombuffer(data, dtype="<f4", offset=_HEADER.size)
    return flat.reshape(rows, cols).astype(np.float32)


def write_vocabulary(path, words: list[str]) -> None:
    atomic_write_bytes(path, ("".join(w + "\n" for w in words)).encode("utf-8"))


def read_vocabulary(path) -> list[str]:
    text = Path(path).read_text(encoding="utf-8")
    return [line for line in text.splitlines() if line]


def write_labeling(path, assignments) -> None:
    labels = np.asarray(assignments, dtype=np.int64)
    atomic_write_bytes(path, ("".join(f"{v}\n" for v in labels)).encode("utf-8"))


def read_labeling(path) -> np.ndarray:
    lines = [ln for ln in Path(path).read_text(encoding="utf-8").splitlines() if ln.strip()]
    try:
        return np.array([int(ln) for ln in lines], dtype=np.int64)
    except ValueError as exc:
        raise FormatError(f"labeling file {path}: {exc}") from None


def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
            os.replace(tmp, path)
        except BaseException:
            os.unlink(tmp)
            raise
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))
