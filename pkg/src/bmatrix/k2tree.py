"""Succinct sparse binary matrix with hybrid-k subdivision.

The matrix is padded to a square and recursively split into k x k blocks;
each level stores one bit per block (1 = block contains a 1). Internal
level bits live in T; with the leaf vocabulary disabled the last level's
bits (the cells) live in L. With a leaf vocabulary, subdivision stops at
leaf_side x leaf_side blocks whose contents are deduplicated into a
frequency-ranked vocabulary, and the per-leaf ids are stored as a DAC.

Child navigation follows rank over T: the children of the j-th set bit
of a level are consecutive at the next level, so a single bitmap plus
per-level offsets replaces all pointers.
"""

from __future__ import annotations

import struct
from bisect import bisect_right
from dataclasses import dataclass
from io import BytesIO
from math import prod

import numpy as np

from .bitvector import SAMPLE_PRESETS, BitVector
from .dac import Dac

MAX_SIDE = 1 << 31  # path codes must fit in int64

VOCAB_PLAIN = "plain"
VOCAB_COLS_FULL = "cols-full"
VOCAB_COLS_RANK = "cols-rank"
VOCAB_ENCODINGS = (VOCAB_PLAIN, VOCAB_COLS_FULL, VOCAB_COLS_RANK)


@dataclass(frozen=True)
class Stage:
    """A run of subdivision levels with a common branching side k.

    levels=None means "use this k for all remaining levels"; only the
    last stage may be unbounded.
    """
    k: int
    levels: int | None = None


@dataclass(frozen=True)
class K2Config:
    stages: tuple[Stage, ...] = (Stage(4, 5), Stage(2, None))
    leaf_side: int = 8              # 1 disables the vocabulary
    vocab_encoding: str = VOCAB_COLS_FULL
    sample_preset: str = "default"
    dac_chunk_bits: int = 8

    def __post_init__(self):
        if not self.stages:
            raise ValueError("at least one subdivision stage is required")
        for i, st in enumerate(self.stages):
            if st.k < 2:
                raise ValueError("branching side k must be >= 2")
            if st.levels is None and i != len(self.stages) - 1:
                raise ValueError("only the last stage may be unbounded")
            if st.levels is not None and st.levels < 0:
                raise ValueError("stage level count must be >= 0")
        if self.leaf_side != 1:
            if self.leaf_side not in (2, 4, 8):
                raise ValueError("leaf_side must be 1 (disabled) or one of 2, 4, 8")
            if self.vocab_encoding not in VOCAB_ENCODINGS:
                raise ValueError(f"unknown vocabulary encoding {self.vocab_encoding!r}")
        if self.sample_preset not in SAMPLE_PRESETS:
            raise ValueError(f"unknown sample preset {self.sample_preset!r}")
        if self.dac_chunk_bits < 1:
            raise ValueError("dac_chunk_bits must be >= 1")

    @property
    def sample_rate(self) -> int:
        return SAMPLE_PRESETS[self.sample_preset]


def plan_levels(config: K2Config, max_dim: int) -> list[int]:
    """Per-level branching sides covering max_dim.

    Picks the smallest side of the form prod(k_i) * leaf_side >= max_dim
    reachable with the configured stage budget, preferring to spend levels
    on earlier stages when sides tie. Small matrices simply use fewer
    levels of the early stages. At least one subdivision level is always
    planned so T:L is never degenerate.
    """
    target = max(int(max_dim), 1)
    stages = config.stages
    best: tuple[int, tuple[int, ...]] | None = None

    def consider(counts: tuple[int, ...], side: int) -> None:
        nonlocal best
        if side < target:
            return
        if best is None or side < best[0] or (side == best[0] and counts > best[1]):
            best = (side, counts)

    def walk(i: int, counts: tuple[int, ...], side: int) -> None:
        if i == len(stages):
            consider(counts, side)
            return
        st = stages[i]
        if st.levels is None:
            extra = 0
            s = side
            while True:
                consider(counts + (extra,), s)
                if s >= target:
                    break
                extra += 1
                s *= st.k
            return
        for used in range(st.levels + 1):
            walk(i + 1, counts + (used,), side * st.k ** used)

    walk(0, (), config.leaf_side)
    assert best is not None
    counts = list(best[1])
    if sum(counts) == 0:
        counts[-1] = 1
    ks: list[int] = []
    for st, used in zip(stages, counts):
        ks.extend([st.k] * used)
    return ks


class LeafVocabulary:
    """Distinct leaf matrices ranked by descending frequency.

    plain      -- each matrix stored as side*side bits.
    cols-full  -- per column: a presence bit in C plus a log2(side)-bit row
                  index in R (unset columns keep row 0).
    cols-rank  -- like cols-full but R holds entries only for set columns,
                  located through rank on C. Both column encodings require
                  at most one 1 per leaf column.
    """

    __slots__ = ("encoding", "side", "count", "patterns", "col_flags", "row_in_col")

    def __init__(self, encoding, side, count, patterns=None, col_flags=None,
                 row_in_col=None):
        self.encoding = encoding
        self.side = side
        self.count = count
        self.patterns = patterns       # plain: list of side*side-bit ints
        self.col_flags = col_flags     # cols-*: BitVector of count*side bits
        self.row_in_col = row_in_col   # cols-*: list of row indices

    @classmethod
    def build(cls, patterns, side: int, encoding: str,
              sample_rate: int) -> "LeafVocabulary":
        """patterns[i] = bits of the matrix with id i, bit r*side+c set for a 1."""
        pats = np.asarray(patterns, dtype=np.uint64).ravel()
        m = int(pats.size)
        if encoding == VOCAB_PLAIN:
            return cls(encoding, side, m, patterns=pats.tolist())
        shifts = np.arange(side * side, dtype=np.uint64)
        cells = ((pats[:, None] >> shifts[None, :]) & np.uint64(1)).astype(bool)
        cells = cells.reshape(m, side, side)          # [id, row, col]
        per_col = cells.sum(axis=1)
        if (per_col > 1).any():
            raise ValueError(
                f"{encoding} vocabulary requires at most one 1 per leaf column")
        col_flags = BitVector(per_col.ravel() > 0, sample_rate)
        rows = np.argmax(cells, axis=1)               # 0 for empty columns
        if encoding == VOCAB_COLS_FULL:
            return cls(encoding, side, m, col_flags=col_flags,
                       row_in_col=rows.ravel().tolist())
        mask = per_col.ravel() > 0
        return cls(encoding, side, m, col_flags=col_flags,
                   row_in_col=rows.ravel()[mask].tolist())

    def bit(self, e: int, r: int, c: int) -> bool:
        """Cell (r, c) of the stored leaf matrix e."""
        if not 0 <= e < self.count:
            raise IndexError(f"leaf id {e} out of range [0, {self.count})")
        if not (0 <= r < self.side and 0 <= c < self.side):
            raise IndexError(f"cell ({r}, {c}) outside a {self.side}x{self.side} leaf")
        if self.encoding == VOCAB_PLAIN:
            return (self.patterns[e] >> (r * self.side + c)) & 1 == 1
        i = e * self.side + c
        if not self.col_flags.access(i):
            return False
        if self.encoding == VOCAB_COLS_FULL:
            return self.row_in_col[i] == r
        return self.row_in_col[self.col_flags.rank1(i) - 1] == r

    # Bulk enumerators used by the tree traversals; local coordinates,
    # ascending / row-major order so results come out sorted without probing
    # every cell of a leaf.

    def row_cols(self, e: int, r: int) -> list[int]:
        """Columns set in row r of leaf e, ascending."""
        side = self.side
        if self.encoding == VOCAB_PLAIN:
            bits = (self.patterns[e] >> (r * side)) & ((1 << side) - 1)
            out = []
            while bits:
                low = bits & -bits
                out.append(low.bit_length() - 1)
                bits ^= low
            return out
        base = e * side
        words = self.col_flags.words
        rows = self.row_in_col
        if self.encoding == VOCAB_COLS_FULL:
            return [c for c in range(side)
                    if (words[(base + c) >> 6] >> ((base + c) & 63)) & 1
                    and rows[base + c] == r]
        j = self.col_flags.rank1(base - 1) if base else 0
        out = []
        for c in range(side):
            i = base + c
            if (words[i >> 6] >> (i & 63)) & 1:
                if rows[j] == r:
                    out.append(c)
                j += 1
        return out

    def col_rows(self, e: int, c: int) -> list[int]:
        """Rows set in column c of leaf e, ascending."""
        side = self.side
        if self.encoding == VOCAB_PLAIN:
            bits = self.patterns[e] >> c
            out = []
            for r in range(side):
                if bits & 1:
                    out.append(r)
                bits >>= side
            return out
        i = e * side + c
        if not self.col_flags.access(i):
            return []
        if self.encoding == VOCAB_COLS_FULL:
            return [self.row_in_col[i]]
        return [self.row_in_col[self.col_flags.rank1(i) - 1]]

    def cells(self, e: int) -> list[tuple[int, int]]:
        """Set cells of leaf e in row-major order."""
        side = self.side
        if self.encoding == VOCAB_PLAIN:
            bits = self.patterns[e]
            out = []
            while bits:
                low = bits & -bits
                b = low.bit_length() - 1
                out.append((b // side, b % side))
                bits ^= low
            return out
        base = e * side
        words = self.col_flags.words
        rows = self.row_in_col
        if self.encoding == VOCAB_COLS_FULL:
            pairs = [(rows[base + c], c) for c in range(side)
                     if (words[(base + c) >> 6] >> ((base + c) & 63)) & 1]
        else:
            j = self.col_flags.rank1(base - 1) if base else 0
            pairs = []
            for c in range(side):
                i = base + c
                if (words[i >> 6] >> (i & 63)) & 1:
                    pairs.append((rows[j], c))
                    j += 1
        pairs.sort()
        return pairs

    @property
    def row_index_bits(self) -> int:
        return self.side.bit_length() - 1  # side is a power of two

    def payload_bits(self) -> int:
        """Semantic payload size in bits (packing padding excluded)."""
        if self.encoding == VOCAB_PLAIN:
            return self.count * self.side * self.side
        if self.encoding == VOCAB_COLS_FULL:
            return self.count * self.side * (1 + self.row_index_bits)
        return self.count * self.side + len(self.row_in_col) * self.row_index_bits

    @property
    def data_bytes(self) -> int:
        return (self.payload_bits() + 7) // 8

    @property
    def accel_bytes(self) -> int:
        return self.col_flags.accel_bytes if self.col_flags is not None else 0

    def write(self, out) -> None:
        from ._binio import pack_fixed
        tag = VOCAB_ENCODINGS.index(self.encoding)
        out.write(struct.pack("<BBQ", tag, self.side, self.count))
        if self.encoding == VOCAB_PLAIN:
            out.write(pack_fixed(self.patterns, self.side * self.side))
        else:
            self.col_flags.write(out)
            out.write(struct.pack("<Q", len(self.row_in_col)))
            out.write(pack_fixed(self.row_in_col, self.row_index_bits))

    @classmethod
    def read(cls, src, sample_rate: int) -> "LeafVocabulary":
        from ._binio import unpack_fixed
        tag, side, count = struct.unpack("<BBQ", src.read(10))
        encoding = VOCAB_ENCODINGS[tag]
        if encoding == VOCAB_PLAIN:
            n_bytes = (count * side * side + 7) // 8
            patterns = unpack_fixed(src.read(n_bytes), side * side, count)
            return cls(encoding, side, count, patterns=patterns)
        col_flags = BitVector.read(src, sample_rate)
        (n_rows,) = struct.unpack("<Q", src.read(8))
        width = side.bit_length() - 1
        rows = unpack_fixed(src.read((n_rows * width + 7) // 8), width, n_rows)
        return cls(encoding, side, count, col_flags=col_flags, row_in_col=rows)


class K2Tree:
    """k2-tree over an n_rows x n_cols binary matrix, immutable after build."""

    __slots__ = ("config", "n_rows", "n_cols", "side", "ks", "tree_bits",
                 "leaf_bits", "leaf_ids", "vocab",
                 "_arity", "_block", "_level_start", "_ones_before", "_total_bits")

    def __init__(self, config, n_rows, n_cols, side, ks, tree_bits,
                 leaf_bits=None, leaf_ids=None, vocab=None):
        self.config = config
        self.n_rows = n_rows
        self.n_cols = n_cols
        self.side = side
        self.ks = ks
        self.tree_bits = tree_bits
        self.leaf_bits = leaf_bits
        self.leaf_ids = leaf_ids
        self.vocab = vocab
        self._index_levels()

    # -- construction ---------------------------------------------------

    @classmethod
    def build(cls, points, n_rows: int, n_cols: int,
              config: K2Config = K2Config()) -> "K2Tree":
        """Build from an iterable/array of (row, col) pairs.

        Duplicated points are tolerated (cells are idempotent); points
        outside the logical bounds are rejected.
        """
        pts = np.asarray(list(points) if not isinstance(points, np.ndarray) else points,
                         dtype=np.int64)
        if pts.size == 0:
            pts = pts.reshape(0, 2)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError("points must be (row, col) pairs")
        rows, cols = pts[:, 0], pts[:, 1]
        if n_rows == 0 or n_cols == 0:
            if pts.shape[0]:
                raise ValueError("points given for an empty matrix")
            return cls(config, int(n_rows), int(n_cols), 0, [],
                       BitVector((), config.sample_rate))
        if pts.shape[0] and (
                rows.min() < 0 or rows.max() >= n_rows
                or cols.min() < 0 or cols.max() >= n_cols):
            raise ValueError("point outside matrix bounds")

        ks = plan_levels(config, max(n_rows, n_cols))
        side = prod(ks) * config.leaf_side
        if side > MAX_SIDE:
            raise ValueError(f"padded side {side} exceeds supported maximum {MAX_SIDE}")
        depth = len(ks)
        leaf_side = config.leaf_side
        rate = config.sample_rate

        block = side
        leaf_code = np.zeros(pts.shape[0], dtype=np.int64)
        for k in ks:
            block //= k
            digit = (rows // block % k) * k + (cols // block % k)
            leaf_code = leaf_code * (k * k) + digit

        if leaf_side > 1:
            bit_idx = ((rows % leaf_side) * leaf_side + (cols % leaf_side)).astype(np.uint64)
            masks = np.uint64(1) << bit_idx
            order = np.argsort(leaf_code, kind="stable")
            lc = leaf_code[order]
            if lc.size:
                starts = np.flatnonzero(np.r_[True, lc[1:] != lc[:-1]])
                codes = lc[starts]
                patterns = np.bitwise_or.reduceat(masks[order], starts)
            else:
                codes = lc
                patterns = masks
        else:
            codes = np.unique(leaf_code)
            patterns = None

        level_bits: list[np.ndarray] = [None] * depth  # type: ignore[list-item]
        for lvl in range(depth - 1, -1, -1):
            arity = ks[lvl] * ks[lvl]
            digit = codes % arity
            parent = codes // arity
            if lvl == 0:
                bits = np.zeros(arity, dtype=bool)
                bits[digit] = True
            else:
                uniq = np.unique(parent)
                idx = np.searchsorted(uniq, parent)
                bits = np.zeros(len(uniq) * arity, dtype=bool)
                bits[idx * arity + digit] = True
                codes = uniq
            level_bits[lvl] = bits

        if leaf_side > 1:
            tree = BitVector(np.concatenate(level_bits), rate)
            if patterns.size:
                uniq_pat, first, inverse, counts = np.unique(
                    patterns, return_index=True, return_inverse=True,
                    return_counts=True)
                by_freq = np.lexsort((first, -counts))
                rank_of = np.empty(len(uniq_pat), dtype=np.int64)
                rank_of[by_freq] = np.arange(len(uniq_pat))
                ids = rank_of[inverse]
                vocab_patterns = uniq_pat[by_freq]
            else:
                ids = np.zeros(0, dtype=np.int64)
                vocab_patterns = np.zeros(0, dtype=np.uint64)
            vocab = LeafVocabulary.build(vocab_patterns, leaf_side,
                                         config.vocab_encoding, rate)
            leaf_ids = Dac.encode(ids, config.dac_chunk_bits, rate)
            return cls(config, int(n_rows), int(n_cols), side, ks, tree,
                       leaf_ids=leaf_ids, vocab=vocab)

        tree = BitVector(
            np.concatenate(level_bits[:-1]) if depth > 1 else np.zeros(0, dtype=bool),
            rate)
        leaves = BitVector(level_bits[-1], rate)
        return cls(config, int(n_rows), int(n_cols), side, ks, tree,
                   leaf_bits=leaves)

    def _index_levels(self) -> None:
        depth = len(self.ks)
        self._arity = [k * k for k in self.ks]
        block = [self.side]
        for k in self.ks:
            block.append(block[-1] // k)
        self._block = block
        start = [0]
        ones_before = [0]
        nodes = 1
        tree = self.tree_bits
        in_tree = depth if self.vocab is not None else depth - 1
        for lvl in range(depth):
            n_bits = nodes * self._arity[lvl]
            end = start[-1] + n_bits
            if lvl < in_tree:
                ones = (tree.rank1(end - 1) if end else 0) - ones_before[-1]
                ones_before.append(ones_before[-1] + ones)
                nodes = ones
            start.append(end)
        self._level_start = start
        self._ones_before = ones_before
        self._total_bits = start[-1] if depth else 0

    # -- bit-level navigation ---------------------------------------------

    @property
    def depth(self) -> int:
        return len(self.ks)

    def bit_at(self, pos: int) -> bool:
        """Bit at `pos` in the T:L concatenation."""
        t_len = self.tree_bits.length
        if pos < t_len:
            return self.tree_bits.access(pos)
        return self.leaf_bits.access(pos - t_len)

    def _level_of(self, pos: int) -> int:
        return bisect_right(self._level_start, pos) - 1

    def children_base(self, pos: int) -> int:
        """First child's position in T:L for the set internal bit at `pos`.

        The children of the j-th set bit of a level are consecutive at the
        next level, so the base is next level's start plus (j-1) arities.
        """
        if not self.tree_bits.access(pos):
            raise ValueError(f"no node at position {pos}: bit is 0")
        lvl = self._level_of(pos)
        if lvl >= self.depth - 1 and self.vocab is not None:
            raise ValueError("node's children are vocabulary leaves, not T:L bits")
        ordinal = self.tree_bits.rank1(pos) - self._ones_before[lvl] - 1
        return self._level_start[lvl + 1] + ordinal * self._arity[lvl + 1]

    def _leaf_id(self, pos: int) -> int:
        # pos = set bit at the last level of T (vocabulary mode)
        last = self.depth - 1
        ordinal = self.tree_bits.rank1(pos) - self._ones_before[last] - 1
        return self.leaf_ids.access(ordinal)

    # -- queries ------------------------------------------------------------

    def _check_cell(self, r: int, c: int) -> None:
        if not 0 <= r < self.n_rows:
            raise IndexError(f"row {r} out of range [0, {self.n_rows})")
        if not 0 <= c < self.n_cols:
            raise IndexError(f"col {c} out of range [0, {self.n_cols})")

    def cell(self, r: int, c: int) -> bool:
        """True iff cell (r, c) is set."""
        self._check_cell(r, c)
        if self.depth == 0:
            return False
        tree = self.tree_bits
        twords = tree.words
        last = self.depth - 1
        base = 0
        for lvl in range(self.depth):
            k = self.ks[lvl]
            child = self._block[lvl + 1]
            pos = base + (r // child % k) * k + (c // child % k)
            if lvl == last:
                if self.vocab is None:
                    return self.bit_at(pos)
                if not (twords[pos >> 6] >> (pos & 63)) & 1:
                    return False
                side = self.config.leaf_side
                return self.vocab.bit(self._leaf_id(pos), r % side, c % side)
            if not (twords[pos >> 6] >> (pos & 63)) & 1:
                return False
            ordinal = tree.rank1(pos) - self._ones_before[lvl] - 1
            base = self._level_start[lvl + 1] + ordinal * self._arity[lvl + 1]
        raise AssertionError("unreachable")

    def row(self, r: int, c_lo: int = 0, c_hi: int | None = None,
            limit: int | None = None) -> list[int]:
        """Columns c in [c_lo, c_hi] with cell (r, c) set, ascending."""
        if c_hi is None:
            c_hi = self.n_cols - 1
        if not 0 <= r < self.n_rows:
            raise IndexError(f"row {r} out of range [0, {self.n_rows})")
        if not (0 <= c_lo <= c_hi < self.n_cols):
            raise IndexError(f"column range [{c_lo}, {c_hi}] invalid for {self.n_cols} cols")
        out: list[int] = []
        if self.depth == 0:
            return out
        tree = self.tree_bits
        twords = tree.words
        rank1 = tree.rank1
        block = self._block
        ks = self.ks
        level_start = self._level_start
        ones_before = self._ones_before
        arity = self._arity
        last = self.depth - 1
        vocab = self.vocab
        leaf_side = self.config.leaf_side
        t_len = tree.length
        lwords = self.leaf_bits.words if self.leaf_bits is not None else None
        leaf_access = self.leaf_ids.access if self.leaf_ids is not None else None
        # stack frames: (level of the children bits, their base, block origin)
        stack = [(0, 0, 0, 0)]
        while stack:
            lvl, base, row0, col0 = stack.pop()
            k = ks[lvl]
            child = block[lvl + 1]
            row_base = base + ((r - row0) // child) * k
            cc_lo = 0 if c_lo <= col0 else (c_lo - col0) // child
            cc_hi = k - 1 if c_hi >= col0 + k * child - 1 else (c_hi - col0) // child
            if lvl == last:
                if vocab is None:
                    for cc in range(cc_lo, cc_hi + 1):
                        pos = row_base + cc - t_len
                        if (lwords[pos >> 6] >> (pos & 63)) & 1:
                            out.append(col0 + cc)
                            if limit is not None and len(out) >= limit:
                                return out
                else:
                    r_loc = (r - row0) % leaf_side
                    before = ones_before[last]
                    for cc in range(cc_lo, cc_hi + 1):
                        pos = row_base + cc
                        if not (twords[pos >> 6] >> (pos & 63)) & 1:
                            continue
                        leaf = leaf_access(rank1(pos) - before - 1)
                        c_base = col0 + cc * leaf_side
                        for c_loc in vocab.row_cols(leaf, r_loc):
                            cg = c_base + c_loc
                            if c_lo <= cg <= c_hi:
                                out.append(cg)
                                if limit is not None and len(out) >= limit:
                                    return out
            else:
                next_start = level_start[lvl + 1]
                next_arity = arity[lvl + 1]
                before = ones_before[lvl]
                r0 = row0 + ((r - row0) // child) * child
                for cc in range(cc_hi, cc_lo - 1, -1):
                    pos = row_base + cc
                    if (twords[pos >> 6] >> (pos & 63)) & 1:
                        stack.append((lvl + 1,
                                      next_start + (rank1(pos) - before - 1) * next_arity,
                                      r0, col0 + cc * child))
        return out

    def col(self, c: int, limit: int | None = None) -> list[int]:
        """Rows r with cell (r, c) set, ascending; stops early at `limit`."""
        if not 0 <= c < self.n_cols:
            raise IndexError(f"col {c} out of range [0, {self.n_cols})")
        out: list[int] = []
        if self.depth == 0:
            return out
        tree = self.tree_bits
        twords = tree.words
        rank1 = tree.rank1
        block = self._block
        ks = self.ks
        level_start = self._level_start
        ones_before = self._ones_before
        arity = self._arity
        last = self.depth - 1
        vocab = self.vocab
        leaf_side = self.config.leaf_side
        n_rows = self.n_rows
        t_len = tree.length
        lwords = self.leaf_bits.words if self.leaf_bits is not None else None
        leaf_access = self.leaf_ids.access if self.leaf_ids is not None else None
        stack = [(0, 0, 0, 0)]
        while stack:
            lvl, base, row0, col0 = stack.pop()
            k = ks[lvl]
            child = block[lvl + 1]
            cc = (c - col0) // child
            rr_hi = k - 1 if row0 + k * child <= n_rows else (n_rows - 1 - row0) // child
            if lvl == last:
                if vocab is None:
                    for rr in range(rr_hi + 1):
                        pos = base + rr * k + cc - t_len
                        if (lwords[pos >> 6] >> (pos & 63)) & 1:
                            out.append(row0 + rr * child)
                            if limit is not None and len(out) >= limit:
                                return out
                else:
                    c_loc = (c - col0) % leaf_side
                    before = ones_before[last]
                    for rr in range(rr_hi + 1):
                        pos = base + rr * k + cc
                        if not (twords[pos >> 6] >> (pos & 63)) & 1:
                            continue
                        leaf = leaf_access(rank1(pos) - before - 1)
                        r_base = row0 + rr * leaf_side
                        for r_loc in vocab.col_rows(leaf, c_loc):
                            rg = r_base + r_loc
                            if rg < n_rows:
                                out.append(rg)
                                if limit is not None and len(out) >= limit:
                                    return out
            else:
                next_start = level_start[lvl + 1]
                next_arity = arity[lvl + 1]
                before = ones_before[lvl]
                c0 = col0 + cc * child
                for rr in range(rr_hi, -1, -1):
                    pos = base + rr * k + cc
                    if (twords[pos >> 6] >> (pos & 63)) & 1:
                        stack.append((lvl + 1,
                                      next_start + (rank1(pos) - before - 1) * next_arity,
                                      row0 + rr * child, c0))
        return out

    def rect(self, r_lo: int, r_hi: int, c_lo: int, c_hi: int) -> list[tuple[int, int]]:
        """Set cells inside the rectangle, in submatrix DFS order.

        Results are not globally sorted; callers needing column order sort
        the returned pairs themselves.
        """
        if not (0 <= r_lo <= r_hi < self.n_rows):
            raise IndexError(f"row range [{r_lo}, {r_hi}] invalid for {self.n_rows} rows")
        if not (0 <= c_lo <= c_hi < self.n_cols):
            raise IndexError(f"column range [{c_lo}, {c_hi}] invalid for {self.n_cols} cols")
        out: list[tuple[int, int]] = []
        if self.depth == 0:
            return out
        tree = self.tree_bits
        twords = tree.words
        rank1 = tree.rank1
        block = self._block
        ks = self.ks
        level_start = self._level_start
        ones_before = self._ones_before
        arity = self._arity
        last = self.depth - 1
        vocab = self.vocab
        leaf_side = self.config.leaf_side
        t_len = tree.length
        lwords = self.leaf_bits.words if self.leaf_bits is not None else None
        leaf_access = self.leaf_ids.access if self.leaf_ids is not None else None
        stack = [(0, 0, 0, 0)]
        while stack:
            lvl, base, row0, col0 = stack.pop()
            k = ks[lvl]
            child = block[lvl + 1]
            rr_lo = 0 if r_lo <= row0 else (r_lo - row0) // child
            rr_hi = k - 1 if r_hi >= row0 + k * child - 1 else (r_hi - row0) // child
            cc_lo = 0 if c_lo <= col0 else (c_lo - col0) // child
            cc_hi = k - 1 if c_hi >= col0 + k * child - 1 else (c_hi - col0) // child
            if lvl == last:
                if vocab is None:
                    for rr in range(rr_lo, rr_hi + 1):
                        rbase = base + rr * k - t_len
                        rg = row0 + rr * child
                        for cc in range(cc_lo, cc_hi + 1):
                            pos = rbase + cc
                            if (lwords[pos >> 6] >> (pos & 63)) & 1:
                                out.append((rg, col0 + cc * child))
                else:
                    before = ones_before[last]
                    whole_rows = r_lo <= row0 and row0 + k * child - 1 <= r_hi
                    whole_cols = c_lo <= col0 and col0 + k * child - 1 <= c_hi
                    for rr in range(rr_lo, rr_hi + 1):
                        rbase = base + rr * k
                        r_base = row0 + rr * leaf_side
                        for cc in range(cc_lo, cc_hi + 1):
                            pos = rbase + cc
                            if not (twords[pos >> 6] >> (pos & 63)) & 1:
                                continue
                            leaf = leaf_access(rank1(pos) - before - 1)
                            c_base = col0 + cc * leaf_side
                            if whole_rows and whole_cols:
                                for r_loc, c_loc in vocab.cells(leaf):
                                    out.append((r_base + r_loc, c_base + c_loc))
                            else:
                                for r_loc, c_loc in vocab.cells(leaf):
                                    if (r_lo <= r_base + r_loc <= r_hi
                                            and c_lo <= c_base + c_loc <= c_hi):
                                        out.append((r_base + r_loc, c_base + c_loc))
            else:
                next_start = level_start[lvl + 1]
                next_arity = arity[lvl + 1]
                before = ones_before[lvl]
                for rr in range(rr_hi, rr_lo - 1, -1):
                    for cc in range(cc_hi, cc_lo - 1, -1):
                        pos = base + rr * k + cc
                        if (twords[pos >> 6] >> (pos & 63)) & 1:
                            stack.append((lvl + 1,
                                          next_start + (rank1(pos) - before - 1) * next_arity,
                                          row0 + rr * child, col0 + cc * child))
        return out

    # -- space accounting -----------------------------------------------

    @property
    def data_bytes(self) -> int:
        total = self.tree_bits.data_bytes
        if self.leaf_bits is not None:
            total += self.leaf_bits.data_bytes
        if self.leaf_ids is not None:
            total += self.leaf_ids.data_bytes
        if self.vocab is not None:
            total += self.vocab.data_bytes
        return total

    @property
    def accel_bytes(self) -> int:
        total = self.tree_bits.accel_bytes
        if self.leaf_bits is not None:
            total += self.leaf_bits.accel_bytes
        if self.leaf_ids is not None:
            total += self.leaf_ids.accel_bytes
        if self.vocab is not None:
            total += self.vocab.accel_bytes
        return total

    def serialized_bytes(self) -> int:
        buf = BytesIO()
        self.write(buf)
        return buf.tell()

    # -- serialization ----------------------------------------------------

    def write(self, out) -> None:
        cfg = self.config
        out.write(struct.pack("<B", len(cfg.stages)))
        for st in cfg.stages:
            out.write(struct.pack("<Bh", st.k, -1 if st.levels is None else st.levels))
        preset = 0 if cfg.sample_preset == "default" else 1
        enc = VOCAB_ENCODINGS.index(cfg.vocab_encoding) if cfg.leaf_side > 1 else 255
        out.write(struct.pack("<BBBB", cfg.leaf_side, enc, preset, cfg.dac_chunk_bits))
        out.write(struct.pack("<QQQ", self.n_rows, self.n_cols, self.side))
        out.write(struct.pack("<H", len(self.ks)))
        out.write(bytes(self.ks))
        self.tree_bits.write(out)
        if self.side == 0:
            out.write(struct.pack("<B", 2))
        elif self.vocab is not None:
            out.write(struct.pack("<B", 1))
            self.leaf_ids.write(out)
            self.vocab.write(out)
        else:
            out.write(struct.pack("<B", 0))
            self.leaf_bits.write(out)

    @classmethod
    def read(cls, src) -> "K2Tree":
        (n_stages,) = struct.unpack("<B", src.read(1))
        stages = []
        for _ in range(n_stages):
            k, levels = struct.unpack("<Bh", src.read(3))
            stages.append(Stage(k, None if levels < 0 else levels))
        leaf_side, enc, preset, chunk_bits = struct.unpack("<BBBB", src.read(4))
        config = K2Config(
            stages=tuple(stages), leaf_side=leaf_side,
            vocab_encoding=VOCAB_ENCODINGS[enc] if enc != 255 else VOCAB_COLS_FULL,
            sample_preset="default" if preset == 0 else "dense",
            dac_chunk_bits=chunk_bits)
        n_rows, n_cols, side = struct.unpack("<QQQ", src.read(24))
        (depth,) = struct.unpack("<H", src.read(2))
        ks = list(src.read(depth))
        tree = BitVector.read(src, config.sample_rate)
        (mode,) = struct.unpack("<B", src.read(1))
        if mode == 2:
            return cls(config, n_rows, n_cols, side, ks, tree)
        if mode == 1:
            leaf_ids = Dac.read(src, config.sample_rate)
            vocab = LeafVocabulary.read(src, config.sample_rate)
            return cls(config, n_rows, n_cols, side, ks, tree,
                       leaf_ids=leaf_ids, vocab=vocab)
        leaves = BitVector.read(src, config.sample_rate)
        return cls(config, n_rows, n_cols, side, ks, tree, leaf_bits=leaves)
