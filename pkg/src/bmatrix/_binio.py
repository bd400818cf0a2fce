"""Little-endian binary helpers shared by the serializers."""

from __future__ import annotations

import struct

import numpy as np


def write_u64(out, *values: int) -> None:
    out.write(struct.pack(f"<{len(values)}Q", *values))


def read_u64(src, count: int = 1):
    vals = struct.unpack(f"<{count}Q", src.read(8 * count))
    return vals[0] if count == 1 else vals


def read_exact(src, n: int) -> bytes:
    data = src.read(n)
    if len(data) != n:
        raise ValueError(f"truncated input: wanted {n} bytes, got {len(data)}")
    return data


def pack_fixed(values, width: int) -> bytes:
    """Pack unsigned ints into `width`-bit slots, LSB-first bit order."""
    arr = np.asarray(values, dtype=np.uint64).ravel()
    if arr.size == 0:
        return b""
    shifts = np.arange(width, dtype=np.uint64)
    bits = ((arr[:, None] >> shifts[None, :]) & np.uint64(1)).astype(np.uint8)
    return np.packbits(bits.ravel(), bitorder="little").tobytes()


def unpack_fixed(data: bytes, width: int, count: int) -> list[int]:
    """Inverse of pack_fixed; returns `count` ints."""
    if count == 0:
        return []
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8),
                         count=count * width, bitorder="little")
    weights = (np.uint64(1) << np.arange(width, dtype=np.uint64))
    return (bits.reshape(count, width).astype(np.uint64) @ weights).tolist()
