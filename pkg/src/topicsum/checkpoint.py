"""Binary named-tensor archive for model checkpoints.

Layout: the magic bytes, then per tensor a little-endian u32 name length,
the UTF-8 name, a u32 rank, one u32 per dimension, and the float32
little-endian values in row-major order.  Round-trips are bit-exact.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Mapping

import numpy as np

__all__ = ["MAGIC", "save_tensors", "load_tensors", "load_into"]

MAGIC = b"TWAGCKPT1"


def _as_array(value) -> np.ndarray:
    return np.asarray(getattr(value, "data", value))


def save_tensors(path, tensors: Mapping[str, object]) -> None:
    """Write named arrays (or Tensors) in dict order."""
    with open(path, "wb") as handle:
        handle.write(MAGIC)
        for name, value in tensors.items():
            arr = np.ascontiguousarray(_as_array(value), dtype="<f4")
            encoded = name.encode("utf-8")
            handle.write(struct.pack("<I", len(encoded)))
            handle.write(encoded)
            handle.write(struct.pack("<I", arr.ndim))
            if arr.ndim:
                handle.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            handle.write(arr.tobytes(order="C"))


def load_tensors(path) -> dict[str, np.ndarray]:
    raw = Path(path).read_bytes()
    if not raw.startswith(MAGIC):
        raise ValueError(f"{path}: not a tensor archive (bad magic)")
    offset = len(MAGIC)
    total = len(raw)

    def take(count: int) -> bytes:
        nonlocal offset
        if offset + count > total:
            raise ValueError(f"{path}: truncated archive at byte {offset}")
        chunk = raw[offset:offset + count]
        offset += count
        return chunk

    tensors: dict[str, np.ndarray] = {}
    while offset < total:
        (name_len,) = struct.unpack("<I", take(4))
        name = take(name_len).decode("utf-8")
        if name in tensors:
            raise ValueError(f"{path}: duplicate tensor '{name}'")
        (rank,) = struct.unpack("<I", take(4))
        shape = struct.unpack(f"<{rank}I", take(4 * rank)) if rank else ()
        count = 1
        for dim in shape:
            count *= dim
        values = np.frombuffer(take(4 * count), dtype="<f4").reshape(shape)
        tensors[name] = np.array(values)  # writable copy
    return tensors


def load_into(params: Mapping[str, object], path) -> None:
    """Fill existing parameter tensors from an archive, by name.

    Names present in the archive but not in `params` (and vice versa) are an
    error, as is any shape mismatch; errors name the offending tensors.
    """
    loaded = load_tensors(path)
    unknown = sorted(set(loaded) - set(params))
    if unknown:
        raise ValueError(f"{path}: unknown tensor names in archive: {', '.join(unknown)}")
    missing = sorted(set(params) - set(loaded))
    if missing:
        raise ValueError(f"{path}: archive is missing tensors: {', '.join(missing)}")
    for name, arr in loaded.items():
        target = params[name]
        data = getattr(target, "data", None)
        if data is None or not isinstance(data, np.ndarray):
            raise ValueError(f"parameter '{name}' has no array data to fill")
        if tuple(arr.shape) != tuple(data.shape):
            raise ValueError(f"{path}: tensor '{name}' has shape {tuple(arr.shape)}, "
                             f"model expects {tuple(data.shape)}")
        data[...] = arr
