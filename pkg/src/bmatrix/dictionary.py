"""Four-pool term/id mapping shared by subjects, predicates and objects.

Terms appearing as both subject and object live in a single shared pool
and keep the same id in both roles (1..n_so); subject-only and
object-only terms continue the numbering after the shared pool, so the
subject and object id spaces overlap numerically but denote different
pools above n_so. Pools are sorted lexicographically, which makes builds
deterministic and lookups a binary search.
"""

from __future__ import annotations

import struct
from bisect import bisect_left
from typing import Iterable

from .ntriples import RawTriple


def _index(pool: list[str], term: str) -> int:
    i = bisect_left(pool, term)
    if i < len(pool) and pool[i] == term:
        return i
    return -1


class Dictionary:
    """Immutable term<->id mapping; ids are 1-based per role."""

    __slots__ = ("shared", "subject_only", "object_only", "predicates")

    def __init__(self, shared: list[str], subject_only: list[str],
                 object_only: list[str], predicates: list[str]):
        self.shared = shared
        self.subject_only = subject_only
        self.object_only = object_only
        self.predicates = predicates

    @classmethod
    def empty(cls) -> "Dictionary":
        return cls([], [], [], [])

    @classmethod
    def from_triples(cls, triples: Iterable[RawTriple]):
        """Classify terms and encode; returns (dictionary, sorted unique id triples)."""
        subjects: set[str] = set()
        objects: set[str] = set()
        preds: set[str] = set()
        raw: set[tuple[str, str, str]] = set()
        for t in triples:
            raw.add((t.subject, t.predicate, t.object))
            subjects.add(t.subject)
            preds.add(t.predicate)
            objects.add(t.object)
        shared = sorted(subjects & objects)
        subject_only = sorted(subjects - objects)
        object_only = sorted(objects - subjects)
        predicates = sorted(preds)
        d = cls(shared, subject_only, object_only, predicates)

        n_so = len(shared)
        s_map = {term: i + 1 for i, term in enumerate(shared)}
        o_map = dict(s_map)
        s_map.update({term: n_so + 1 + i for i, term in enumerate(subject_only)})
        o_map.update({term: n_so + 1 + i for i, term in enumerate(object_only)})
        p_map = {term: i + 1 for i, term in enumerate(predicates)}
        ids = sorted(((s_map[s], p_map[p], o_map[o]) for s, p, o in raw),
                     key=lambda t: (t[1], t[2], t[0]))
        return d, ids

    # -- counts ------------------------------------------------------------

    @property
    def so_count(self) -> int:
        return len(self.shared)

    @property
    def subject_count(self) -> int:
        return len(self.shared) + len(self.subject_only)

    @property
    def object_count(self) -> int:
        return len(self.shared) + len(self.object_only)

    @property
    def predicate_count(self) -> int:
        return len(self.predicates)

    # -- term -> id ----------------------------------------------------------

    def subject_id(self, term: str) -> int:
        i = _index(self.shared, term)
        if i >= 0:
            return i + 1
        i = _index(self.subject_only, term)
        if i >= 0:
            return len(self.shared) + i + 1
        raise KeyError(f"subject term not found: {term!r}")

    def object_id(self, term: str) -> int:
        i = _index(self.shared, term)
        if i >= 0:
            return i + 1
        i = _index(self.object_only, term)
        if i >= 0:
            return len(self.shared) + i + 1
        raise KeyError(f"object term not found: {term!r}")

    def predicate_id(self, term: str) -> int:
        i = _index(self.predicates, term)
        if i >= 0:
            return i + 1
        raise KeyError(f"predicate term not found: {term!r}")

    # -- id -> term ----------------------------------------------------------

    def subject_term(self, i: int) -> str:
        if 1 <= i <= len(self.shared):
            return self.shared[i - 1]
        if len(self.shared) < i <= self.subject_count:
            return self.subject_only[i - len(self.shared) - 1]
        raise KeyError(f"subject id not found: {i}")

    def object_term(self, i: int) -> str:
        if 1 <= i <= len(self.shared):
            return self.shared[i - 1]
        if len(self.shared) < i <= self.object_count:
            return self.object_only[i - len(self.shared) - 1]
        raise KeyError(f"object id not found: {i}")

    def predicate_term(self, i: int) -> str:
        if 1 <= i <= len(self.predicates):
            return self.predicates[i - 1]
        raise KeyError(f"predicate id not found: {i}")

    # -- serialization -------------------------------------------------------

    def write(self, out) -> None:
        for pool in (self.shared, self.subject_only, self.object_only,
                     self.predicates):
            blob = b"".join(term.encode("utf-8") for term in pool)
            offsets = [0]
            for term in pool:
                offsets.append(offsets[-1] + len(term.encode("utf-8")))
            out.write(struct.pack("<Q", len(pool)))
            out.write(struct.pack(f"<{len(offsets)}Q", *offsets))
            out.write(blob)

    @classmethod
    def read(cls, src) -> "Dictionary":
        pools = []
        for _ in range(4):
            (count,) = struct.unpack("<Q", src.read(8))
            offsets = struct.unpack(f"<{count + 1}Q", src.read(8 * (count + 1)))
            blob = src.read(offsets[-1])
            pools.append([blob[offsets[i]:offsets[i + 1]].decode("utf-8")
                          for i in range(count)])
        return cls(*pools)

    def serialized_bytes(self) -> int:
        from io import BytesIO
        buf = BytesIO()
        self.write(buf)
        return buf.tell()
