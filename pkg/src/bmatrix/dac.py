"""Direct-access storage for variable-length unsigned integers.

Each value is split into base-2**b chunks, least significant first; chunks
are regrouped per level, with a continuation bitmap per level whose rank
steers the decoder to the next chunk. Value 0 occupies exactly one chunk.
"""

from __future__ import annotations

import struct

import numpy as np

from .bitvector import SAMPLE_RATE_DEFAULT, BitVector
from ._binio import pack_fixed, unpack_fixed


class Dac:
    """Random-access sequence of unsigned ints, immutable after encode."""

    __slots__ = ("chunk_bits", "length", "levels")

    def __init__(self, chunk_bits: int, length: int,
                 levels: list[tuple[list[int], BitVector]]):
        self.chunk_bits = chunk_bits
        self.length = length
        self.levels = levels

    @classmethod
    def encode(cls, values, chunk_bits: int = 8,
               sample_rate: int = SAMPLE_RATE_DEFAULT) -> "Dac":
        if chunk_bits < 1:
            raise ValueError("chunk width must be >= 1")
        arr = np.asarray(values, dtype=np.uint64).ravel()
        b = np.uint64(chunk_bits)
        mask = (np.uint64(1) << b) - np.uint64(1)
        levels = []
        cur = arr
        while cur.size:
            rest = cur >> b
            more = rest != 0
            levels.append(((cur & mask).tolist(),
                           BitVector(more, sample_rate)))
            cur = rest[more]
        return cls(int(chunk_bits), int(arr.size), levels)

    def access(self, i: int) -> int:
        """Reconstruct the i-th encoded value."""
        if not 0 <= i < self.length:
            raise IndexError(f"index {i} out of range [0, {self.length})")
        chunks, flags = self.levels[0]
        value = chunks[i]
        shift = self.chunk_bits
        j = i
        lvl = 0
        while flags.access(j):
            j = flags.rank1(j) - 1
            lvl += 1
            chunks, flags = self.levels[lvl]
            value |= chunks[j] << shift
            shift += self.chunk_bits
        return value

    def __len__(self) -> int:
        return self.length

    def __repr__(self) -> str:
        return f"Dac(chunk_bits={self.chunk_bits}, length={self.length}, levels={len(self.levels)})"

    @property
    def total_chunks(self) -> int:
        return sum(len(chunks) for chunks, _ in self.levels)

    @property
    def data_bytes(self) -> int:
        bits = sum(len(chunks) * self.chunk_bits + flags.length
                   for chunks, flags in self.levels)
        return (bits + 7) // 8

    @property
    def accel_bytes(self) -> int:
        return sum(flags.accel_bytes for _, flags in self.levels)

    def write(self, out) -> None:
        out.write(struct.pack("<BQB", self.chunk_bits, self.length, len(self.levels)))
        for chunks, flags in self.levels:
            out.write(struct.pack("<Q", len(chunks)))
            out.write(pack_fixed(chunks, self.chunk_bits))
            flags.write(out)

    @classmethod
    def read(cls, src, sample_rate: int = SAMPLE_RATE_DEFAULT) -> "Dac":
        chunk_bits, length, n_levels = struct.unpack("<BQB", src.read(10))
        levels = []
        for _ in range(n_levels):
            (count,) = struct.unpack("<Q", src.read(8))
            n_bytes = (count * chunk_bits + 7) // 8
            chunks = unpack_fixed(src.read(n_bytes), chunk_bits, count)
            levels.append((chunks, BitVector.read(src, sample_rate)))
        return cls(chunk_bits, length, levels)
