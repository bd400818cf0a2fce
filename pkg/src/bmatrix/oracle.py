"""Brute-force reference for the eight triple patterns.

Deliberately naive: a dense column scan over the sorted triple arrays,
sharing no code with the succinct query paths. Property tests and the
verify subcommand compare the store against this.
"""

from __future__ import annotations

import numpy as np


class TripleList:
    """Deduplicated id triples kept in (p, o, s) order."""

    __slots__ = ("s", "p", "o")

    def __init__(self, triples):
        arr = np.asarray(list(triples) if not isinstance(triples, np.ndarray)
                         else triples, dtype=np.int64)
        if arr.size == 0:
            arr = arr.reshape(0, 3)
        if arr.ndim != 2 or arr.shape[1] != 3:
            raise ValueError("triples must be (s, p, o) rows")
        if arr.shape[0]:
            arr = arr[np.lexsort((arr[:, 0], arr[:, 2], arr[:, 1]))]
            arr = arr[np.r_[True, (arr[1:] != arr[:-1]).any(axis=1)]]
        self.s = arr[:, 0].copy()
        self.p = arr[:, 1].copy()
        self.o = arr[:, 2].copy()

    def __len__(self) -> int:
        return len(self.s)

    def pattern_query(self, s: int | None = None, p: int | None = None,
                      o: int | None = None):
        """Linear-scan filter; result shapes mirror the store's pattern_query."""
        mask = np.ones(len(self.s), dtype=bool)
        if s is not None:
            mask &= self.s == s
        if p is not None:
            mask &= self.p == p
        if o is not None:
            mask &= self.o == o
        idx = np.flatnonzero(mask)
        if s is not None and p is not None and o is not None:
            return len(idx) > 0
        if s is not None and p is not None:
            return self.o[idx].tolist()
        if p is not None and o is not None:
            return self.s[idx].tolist()
        if s is not None and o is not None:
            return self.p[idx].tolist()
        if s is not None:
            return list(zip(self.p[idx].tolist(), self.o[idx].tolist()))
        if o is not None:
            return list(zip(self.s[idx].tolist(), self.p[idx].tolist()))
        if p is not None:
            return list(zip(self.s[idx].tolist(), self.o[idx].tolist()))
        return list(zip(self.s[idx].tolist(), self.p[idx].tolist(),
                        self.o[idx].tolist()))
