"""Shared binary tensor container (masks, features, weights, fusion traces).

File layout, all integers little-endian:

    offset 0   magic  ``BKT1``            (4 bytes)
    offset 4   dtype code                 (u8; 1 = float32 little-endian)
    offset 5   ndim                       (u8)
    offset 6   dims                       (ndim x u32)
    ...        metadata length            (u32)
    ...        metadata                   (UTF-8 bytes)
    ...        payload, row-major float32 (prod(dims) x 4 bytes)
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import FormatError, InputError

MAGIC = b"BKT1"
DTYPE_F32 = 1
_MAX_NDIM = 8


def write_tensor(path: str | Path, values: np.ndarray, metadata: str = "") -> None:
    """Write ``values`` as a float32 tensor file."""
    arr = np.ascontiguousarray(values, dtype="<f4")
    if arr.ndim == 0 or arr.ndim > _MAX_NDIM:
        raise InputError(f"tensor rank must be 1..{_MAX_NDIM}, got {arr.ndim}")
    meta = metadata.encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<BB", DTYPE_F32, arr.ndim))
        fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        fh.write(struct.pack("<I", len(meta)))
        fh.write(meta)
        fh.write(arr.tobytes())


def read_tensor(path: str | Path) -> tuple[np.ndarray, str]:
    """Read a tensor file, returning (float32 array, metadata string)."""
    blob = Path(path).read_bytes()
    if len(blob) < 6:
        raise FormatError(f"{path}: truncated header ({len(blob)} bytes, need >= 6)")
    if blob[:4] != MAGIC:
        raise FormatError(f"{path}: bad magic at offset 0: {blob[:4]!r} (expected {MAGIC!r})")
    dtype_code, ndim = struct.unpack_from("<BB", blob, 4)
    if dtype_code != DTYPE_F32:
        raise FormatError(f"{path}: unsupported dtype code {dtype_code} at offset 4")
    if not 1 <= ndim <= _MAX_NDIM:
        raise FormatError(f"{path}: invalid ndim {ndim} at offset 5")
    offset = 6
    if len(blob) < offset + 4 * ndim + 4:
        raise FormatError(f"{path}: truncated dims block at offset {offset}")
    dims = struct.unpack_from(f"<{ndim}I", blob, offset)
    offset += 4 * ndim
    (meta_len,) = struct.unpack_from("<I", blob, offset)
    offset += 4
    if len(blob) < offset + meta_len:
        raise FormatError(f"{path}: truncated metadata at offset {offset}")
    try:
        metadata = blob[offset : offset + meta_len].decode("utf-8")
    except UnicodeDecodeError as exc:
        raise FormatError(f"{path}: metadata is not valid UTF-8 at offset {offset}: {exc}")
    offset += meta_len
    count = int(np.prod(dims, dtype=np.int64))
    expected = count * 4
    if len(blob) - offset != expected:
        raise FormatError(
            f"{path}: payload at offset {offset} has {len(blob) - offset} bytes, "
            f"expected {expected} for dims {tuple(dims)}"
        )
    values = np.frombuffer(blob, dtype="<f4", count=count, offset=offset).reshape(dims)
    return values.copy(), metadata


def parse_metadata(metadata: str) -> dict[str, str]:
    """Parse ``key=value`` pairs out of a ``;``-separated metadata string."""
    fields: dict[str, str] = {}
    for part in metadata.split(";"):
        part = part.strip()
        if "=" in part:
            key, value = part.split("=", 1)
            fields[key.strip()] = value.strip()
    return fields
