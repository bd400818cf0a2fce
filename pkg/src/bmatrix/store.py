"""The triple store: two k2-trees plus a compact predicate index.

Triples are sorted by (predicate, object, subject); column i of both
binary matrices represents the i-th triple in that order. The subject
matrix has one row per subject id and a 1 at (s-1, i) for each triple,
the object matrix likewise for objects, so every column carries exactly
one 1 in each matrix. Predicates occupy consecutive column runs tracked
by the predicate index.

All eight bound/unbound triple patterns reduce to row, column, cell and
rectangle queries on the two trees plus rank/select on the predicate
runs. The store is immutable after build and safe for unlimited
concurrent readers; the two merge thresholds only steer query strategy
and may be changed between queries.
"""

from __future__ import annotations

import struct
from bisect import bisect_right
from io import BytesIO

import numpy as np

from ._binio import read_exact
from .dictionary import Dictionary
from .k2tree import K2Config, K2Tree

MAGIC = b"BMX1"
FORMAT_VERSION = 1

DEFAULT_RANK_PERIOD = 1024
DEFAULT_MERGE_THRESHOLD = 10


class PredicateIndex:
    """Column runs per predicate: run starts plus a sampled rank table.

    starts[p-1] is the first column of predicate p (0-based), with a
    final sentinel equal to the triple count; unused predicate ids own
    empty runs. samples[j] holds the predicate of column j*period
    (clamped to the last column), which narrows the binary search that
    maps a column back to its predicate.
    """

    __slots__ = ("starts", "period", "samples", "n", "n_predicates")

    def __init__(self, starts: list[int], period: int, samples: list[int], n: int):
        self.starts = starts
        self.period = period
        self.samples = samples
        self.n = n
        self.n_predicates = len(starts) - 1

    @classmethod
    def from_sorted(cls, preds_sorted: np.ndarray, n_predicates: int,
                    period: int = DEFAULT_RANK_PERIOD) -> "PredicateIndex":
        if period < 1:
            raise ValueError("sampling period must be >= 1")
        n = int(preds_sorted.size)
        starts = np.searchsorted(preds_sorted, np.arange(1, n_predicates + 1),
                                 side="left").tolist()
        starts.append(n)
        if n:
            cols = np.minimum(np.arange(0, n // period + 1) * period, n - 1)
            samples = preds_sorted[cols].tolist()
        else:
            samples = []
        return cls(starts, period, samples, n)

    def _check_predicate(self, p: int) -> None:
        if not 1 <= p <= self.n_predicates:
            raise IndexError(f"predicate id {p} out of range [1, {self.n_predicates}]")

    def first_col(self, p: int) -> int:
        """First column of predicate p's run (== select over the run bitmap)."""
        self._check_predicate(p)
        return self.starts[p - 1]

    def col_range(self, p: int) -> tuple[int, int]:
        """Inclusive column range of predicate p; empty when lo > hi."""
        self._check_predicate(p)
        return self.starts[p - 1], self.starts[p] - 1

    def predicate_of(self, i: int) -> int:
        """Predicate owning column i (== rank over the run bitmap)."""
        if not 0 <= i < self.n:
            raise IndexError(f"column {i} out of range [0, {self.n})")
        j = i // self.period
        lo = self.samples[j]
        hi = self.samples[j + 1] if j + 1 < len(self.samples) else self.n_predicates
        # rightmost start <= i within the sampled predicate window
        idx = bisect_right(self.starts, i, lo - 1, hi) - 1
        return idx + 1

    @property
    def data_bytes(self) -> int:
        return 8 * len(self.starts) + 4 * len(self.samples)

    def write(self, out) -> None:
        out.write(struct.pack("<QQ", self.n, self.period))
        out.write(struct.pack("<Q", len(self.starts)))
        out.write(np.array(self.starts, dtype="<u8").tobytes())
        out.write(struct.pack("<Q", len(self.samples)))
        out.write(np.array(self.samples, dtype="<u4").tobytes())

    @classmethod
    def read(cls, src) -> "PredicateIndex":
        n, period = struct.unpack("<QQ", read_exact(src, 16))
        (n_starts,) = struct.unpack("<Q", read_exact(src, 8))
        starts = np.frombuffer(read_exact(src, 8 * n_starts), dtype="<u8")
        (n_samples,) = struct.unpack("<Q", read_exact(src, 8))
        samples = np.frombuffer(read_exact(src, 4 * n_samples), dtype="<u4")
        return cls(starts.tolist(), period, samples.tolist(), n)


def _merge_sorted_lists(a: list[int], b: list[int]) -> list[int]:
    out = []
    i = j = 0
    while i < len(a) and j < len(b):
        x, y = a[i], b[j]
        if x == y:
            out.append(x)
            i += 1
            j += 1
        elif x < y:
            i += 1
        else:
            j += 1
    return out


class TripleStore:
    """Immutable id-triple store answering all eight triple patterns."""

    __slots__ = ("subject_tree", "object_tree", "pred_index", "n",
                 "n_subjects", "n_objects", "n_predicates",
                 "merge_sorted", "merge_unsorted")

    def __init__(self, subject_tree: K2Tree, object_tree: K2Tree,
                 pred_index: PredicateIndex, n: int, n_subjects: int,
                 n_objects: int, n_predicates: int,
                 merge_sorted: int = DEFAULT_MERGE_THRESHOLD,
                 merge_unsorted: int = DEFAULT_MERGE_THRESHOLD):
        self.subject_tree = subject_tree
        self.object_tree = object_tree
        self.pred_index = pred_index
        self.n = n
        self.n_subjects = n_subjects
        self.n_objects = n_objects
        self.n_predicates = n_predicates
        self.merge_sorted = merge_sorted
        self.merge_unsorted = merge_unsorted

    @classmethod
    def build(cls, triples, n_subjects: int, n_objects: int, n_predicates: int,
              config: K2Config = K2Config(), period: int = DEFAULT_RANK_PERIOD,
              merge_sorted: int = DEFAULT_MERGE_THRESHOLD,
              merge_unsorted: int = DEFAULT_MERGE_THRESHOLD) -> "TripleStore":
        """Build from (s, p, o) id triples, 1-based ids within the given dims.

        Triples are sorted by (p, o, s); duplicates collapse to one column.
        """
        arr = np.asarray(list(triples) if not isinstance(triples, np.ndarray)
                         else triples, dtype=np.int64)
        if arr.size == 0:
            arr = arr.reshape(0, 3)
        if arr.ndim != 2 or arr.shape[1] != 3:
            raise ValueError("triples must be (s, p, o) rows")
        if arr.shape[0]:
            s, p, o = arr[:, 0], arr[:, 1], arr[:, 2]
            if (s.min() < 1 or s.max() > n_subjects
                    or p.min() < 1 or p.max() > n_predicates
                    or o.min() < 1 or o.max() > n_objects):
                raise ValueError("triple id outside the declared dimensions")
            order = np.lexsort((s, o, p))
            arr = arr[order]
            keep = np.r_[True, (arr[1:] != arr[:-1]).any(axis=1)]
            arr = arr[keep]
        n = arr.shape[0]
        cols = np.arange(n, dtype=np.int64)
        subject_tree = K2Tree.build(
            np.column_stack((arr[:, 0] - 1, cols)), n_subjects, n, config)
        object_tree = K2Tree.build(
            np.column_stack((arr[:, 2] - 1, cols)), n_objects, n, config)
        pidx = PredicateIndex.from_sorted(arr[:, 1], n_predicates, period)
        return cls(subject_tree, object_tree, pidx, n, n_subjects, n_objects,
                   n_predicates, merge_sorted, merge_unsorted)

    # -- id validation ---------------------------------------------------

    def _check_s(self, s: int) -> None:
        if not 1 <= s <= self.n_subjects:
            raise IndexError(f"subject id {s} out of range [1, {self.n_subjects}]")

    def _check_p(self, p: int) -> None:
        if not 1 <= p <= self.n_predicates:
            raise IndexError(f"predicate id {p} out of range [1, {self.n_predicates}]")

    def _check_o(self, o: int) -> None:
        if not 1 <= o <= self.n_objects:
            raise IndexError(f"object id {o} out of range [1, {self.n_objects}]")

    # -- the eight patterns ------------------------------------------------

    def contains(self, s: int, p: int, o: int) -> bool:
        """(s, p, o): membership test, first match wins."""
        self._check_s(s)
        self._check_p(p)
        self._check_o(o)
        if self.n == 0:
            return False
        lo, hi = self.pred_index.col_range(p)
        if lo > hi:
            return False
        obj_tree = self.object_tree
        o_row = o - 1
        for i in self.subject_tree.row(s - 1, lo, hi):
            if obj_tree.cell(o_row, i):
                return True
        return False

    def objects(self, s: int, p: int) -> list[int]:
        """(s, p, ?): object ids, ascending."""
        self._check_s(s)
        self._check_p(p)
        if self.n == 0:
            return []
        lo, hi = self.pred_index.col_range(p)
        if lo > hi:
            return []
        col = self.object_tree.col
        return [col(i, limit=1)[0] + 1
                for i in self.subject_tree.row(s - 1, lo, hi)]

    def subjects(self, p: int, o: int) -> list[int]:
        """(?, p, o): subject ids, ascending."""
        self._check_p(p)
        self._check_o(o)
        if self.n == 0:
            return []
        lo, hi = self.pred_index.col_range(p)
        if lo > hi:
            return []
        col = self.subject_tree.col
        return [col(i, limit=1)[0] + 1
                for i in self.object_tree.row(o - 1, lo, hi)]

    def predicates(self, s: int, o: int) -> list[int]:
        """(s, ?, o): predicate ids, ascending.

        Few candidate columns for the object -> cell checks in the
        subject tree; many -> a second row query and a merge of the two
        sorted column lists (threshold: merge_sorted).
        """
        self._check_s(s)
        self._check_o(o)
        if self.n == 0:
            return []
        by_object = self.object_tree.row(o - 1)
        if len(by_object) <= self.merge_sorted:
            s_row = s - 1
            cell = self.subject_tree.cell
            cols = [i for i in by_object if cell(s_row, i)]
        else:
            cols = _merge_sorted_lists(by_object, self.subject_tree.row(s - 1))
        predicate_of = self.pred_index.predicate_of
        return [predicate_of(i) for i in cols]

    def by_subject(self, s: int) -> list[tuple[int, int]]:
        """(s, ?, ?): (predicate, object) pairs, ascending by column."""
        self._check_s(s)
        if self.n == 0:
            return []
        predicate_of = self.pred_index.predicate_of
        col = self.object_tree.col
        return [(predicate_of(i), col(i, limit=1)[0] + 1)
                for i in self.subject_tree.row(s - 1)]

    def by_object(self, o: int) -> list[tuple[int, int]]:
        """(?, ?, o): (subject, predicate) pairs, ascending by column."""
        self._check_o(o)
        if self.n == 0:
            return []
        predicate_of = self.pred_index.predicate_of
        col = self.subject_tree.col
        return [(col(i, limit=1)[0] + 1, predicate_of(i))
                for i in self.object_tree.row(o - 1)]

    def by_predicate(self, p: int) -> list[tuple[int, int]]:
        """(?, p, ?): (subject, object) pairs, ascending by column.

        Few matches -> per-column object lookups; many -> a second
        rectangle query on the object tree, with both DFS result lists
        sorted by column before zipping (threshold: merge_unsorted).
        """
        self._check_p(p)
        if self.n == 0:
            return []
        lo, hi = self.pred_index.col_range(p)
        if lo > hi:
            return []
        with_subject = self.subject_tree.rect(0, self.n_subjects - 1, lo, hi)
        with_subject.sort(key=lambda rc: rc[1])
        if len(with_subject) <= self.merge_unsorted:
            col = self.object_tree.col
            return [(r + 1, col(i, limit=1)[0] + 1) for r, i in with_subject]
        with_object = self.object_tree.rect(0, self.n_objects - 1, lo, hi)
        with_object.sort(key=lambda rc: rc[1])
        return [(sr + 1, orow + 1)
                for (sr, _), (orow, _) in zip(with_subject, with_object)]

    def all_triples(self) -> list[tuple[int, int, int]]:
        """(?, ?, ?): every stored triple, ascending by column."""
        out = []
        for p in range(1, self.n_predicates + 1):
            out.extend((s, p, o) for s, o in self.by_predicate(p))
        return out

    def pattern_query(self, s: int | None = None, p: int | None = None,
                      o: int | None = None):
        """Dispatch on the bound/unbound shape; result shape matches the pattern.

        (s,p,o)->bool, (s,p,?)->[o], (?,p,o)->[s], (s,?,o)->[p],
        (s,?,?)->[(p,o)], (?,?,o)->[(s,p)], (?,p,?)->[(s,o)],
        (?,?,?)->[(s,p,o)].
        """
        if s is not None and p is not None and o is not None:
            return self.contains(s, p, o)
        if s is not None and p is not None:
            return self.objects(s, p)
        if p is not None and o is not None:
            return self.subjects(p, o)
        if s is not None and o is not None:
            return self.predicates(s, o)
        if s is not None:
            return self.by_subject(s)
        if o is not None:
            return self.by_object(o)
        if p is not None:
            return self.by_predicate(p)
        return self.all_triples()

    def pattern_triples(self, s=None, p=None, o=None) -> list[tuple[int, int, int]]:
        """Like pattern_query but always expanded to full (s, p, o) triples."""
        result = self.pattern_query(s, p, o)
        if isinstance(result, bool):
            return [(s, p, o)] if result else []
        if s is not None and p is not None:
            return [(s, p, oo) for oo in result]
        if p is not None and o is not None:
            return [(ss, p, o) for ss in result]
        if s is not None and o is not None:
            return [(s, pp, o) for pp in result]
        if s is not None:
            return [(s, pp, oo) for pp, oo in result]
        if o is not None:
            return [(ss, pp, o) for ss, pp in result]
        if p is not None:
            return [(ss, p, oo) for ss, oo in result]
        return result

    # -- space accounting ----------------------------------------------------

    def space_report(self) -> dict:
        """Per-component sizes: serialized bytes and in-memory rank overhead."""
        parts = {
            "subject_tree": (self.subject_tree.serialized_bytes(),
                             self.subject_tree.accel_bytes),
            "object_tree": (self.object_tree.serialized_bytes(),
                            self.object_tree.accel_bytes),
            "pred_index": (self.pred_index.data_bytes, 0),
        }
        return {name: {"serialized": ser, "accel": acc, "total": ser + acc}
                for name, (ser, acc) in parts.items()}


# -- store files -------------------------------------------------------------


def write_store(out, store: TripleStore, dictionary: Dictionary) -> None:
    out.write(MAGIC)
    out.write(struct.pack("<H", FORMAT_VERSION))
    out.write(struct.pack("<BB", 8, 4))  # widths: run starts, rank samples
    out.write(struct.pack(
        "<QQQQQQQQ", store.n, dictionary.so_count, store.n_subjects,
        store.n_objects, store.n_predicates, store.pred_index.period,
        store.merge_sorted, store.merge_unsorted))
    dictionary.write(out)
    store.pred_index.write(out)
    store.subject_tree.write(out)
    store.object_tree.write(out)


def read_store(src) -> tuple[TripleStore, Dictionary]:
    if read_exact(src, 4) != MAGIC:
        raise ValueError("not a store file (bad magic)")
    (version,) = struct.unpack("<H", read_exact(src, 2))
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported store format version {version}")
    start_w, sample_w = struct.unpack("<BB", read_exact(src, 2))
    if (start_w, sample_w) != (8, 4):
        raise ValueError("unsupported integer widths")
    (n, n_so, n_subjects, n_objects, n_predicates, period,
     merge_sorted, merge_unsorted) = struct.unpack("<QQQQQQQQ", read_exact(src, 64))
    dictionary = Dictionary.read(src)
    if dictionary.so_count != n_so:
        raise ValueError("dictionary does not match store header")
    pidx = PredicateIndex.read(src)
    subject_tree = K2Tree.read(src)
    object_tree = K2Tree.read(src)
    store = TripleStore(subject_tree, object_tree, pidx, n, n_subjects,
                        n_objects, n_predicates, merge_sorted, merge_unsorted)
    return store, dictionary


def save(path: str, store: TripleStore,
         dictionary: Dictionary | None = None) -> None:
    with open(path, "wb") as out:
        write_store(out, store, dictionary or Dictionary.empty())


def load(path: str) -> tuple[TripleStore, Dictionary]:
    with open(path, "rb") as src:
        return read_store(src)


def store_bytes(store: TripleStore, dictionary: Dictionary | None = None) -> int:
    buf = BytesIO()
    write_store(buf, store, dictionary or Dictionary.empty())
    return buf.tell()
