"""Binary array container and manifest persistence.

Container layout (all little-endian):

    bytes 0-3   magic "VPRM"
    bytes 4-5   format version, u16 (currently 1)
    byte  6     dtype code, u8 (1 = float64; the only code in v1)
    byte  7     rank, u8
    next 8*rank dims, u64 each
    payload     row-major float64, 8 * prod(dims) bytes

Writes are atomic (temp file + rename).  Manifests are JSON documents updated
append-only: existing entries are never mutated.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

MAGIC = b"VPRM"
VERSION = 1
DTYPE_F64 = 1


class ContainerFormatError(ValueError):
    pass


def save_array(path, arr: np.ndarray) -> None:
    arr = np.ascontiguousarray(np.asarray(arr, dtype=np.float64))
    path = Path(path)
    header = struct.pack("<4sHBB", MAGIC, VERSION, DTYPE_F64, arr.ndim)
    dims = struct.pack(f"<{arr.ndim}Q", *arr.shape) if arr.ndim else b""
    payload = arr.astype("<f8", copy=False).tobytes(order="C")
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(header)
            fh.write(dims)
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_array(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < 8:
        raise ContainerFormatError(f"{path}: truncated header")
    magic, version, dtype_code, rank = struct.unpack_from("<4sHBB", data, 0)
    if magic != MAGIC:
        raise ContainerFormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise ContainerFormatError(f"{path}: unsupported format version {version}")
    if dtype_code != DTYPE_F64:
        raise ContainerFormatError(f"{path}: unknown dtype code {dtype_code}")
    offset = 8
    if len(data) < offset + 8 * rank:
        raise ContainerFormatError(f"{path}: truncated dims")
    dims = struct.unpack_from(f"<{rank}Q", data, offset) if rank else ()
    offset += 8 * rank
    count = int(np.prod(dims)) if rank else 1
    expected = 8 * count
    if len(data) - offset != expected:
        raise ContainerFormatError(
            f"{path}: payload length {len(data) - offset} != 8*prod(dims) = {expected}"
        )
    arr = np.frombuffer(data, dtype="<f8", count=count, offset=offset)
    return arr.reshape(dims).astype(np.float64, copy=True)


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def write_json(path, payload: dict) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_json(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


class Manifest:
    """Append-only JSON manifest: keys may be added, never rewritten."""

    def __init__(self, path):
        self.path = Path(path)
        self.data = read_json(self.path) if self.path.exists() else {}

    def record(self, key: str, value) -> bool:
        """Record an entry; returns False (no-op) when an identical entry
        already exists.  Raises on conflicting rewrite attempts."""
        if key in self.data:
            if self.data[key] == value:
                return False
            raise ValueError(f"manifest entry '{key}' already exists with different content")
        self.data[key] = value
        write_json(self.path, self.data)
        return True

    def get(self, key: str, default=None):
        return self.data.get(key, default)

    def __contains__(self, key: str) -> bool:
        return key in self.data
