"""Full-scan oracle and a dense per-tuple index used as a size/accuracy baseline.

Dense index file: magic "HIPD", count u64, then count x (key i64, page u64, slot u32).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from hippo.errors import FormatError, StaleIndexError
from hippo.pagestore import TableFile, TupleId
from hippo.predicate import Predicate

_HDR = struct.Struct("<4sQ")
_DENSE_REC = np.dtype([("key", "<i8"), ("page", "<u8"), ("slot", "<u4")])


def oracle_scan(table: TableFile, pred: Predicate) -> set[TupleId]:
    """Every live tuple satisfying pred, found by decoding every page."""
    return {t.tid for t in table.scan() if pred.matches(t.key)}


class FullScan:
    """Snapshot of all live tuples, decoded page by page, for repeated oracle queries.

    Take a new snapshot after the table changes.
    """

    def __init__(self, table: TableFile):
        keys, pages, slots = [], [], []
        for t in table.scan():
            keys.append(t.key)
            pages.append(t.tid.page)
            slots.append(t.tid.slot)
        self.keys = np.asarray(keys, dtype=np.int64)
        self.pages = np.asarray(pages, dtype=np.int64)
        self.slots = np.asarray(slots, dtype=np.int64)

    def query(self, pred: Predicate) -> tuple[np.ndarray, np.ndarray]:
        m = pred.mask(self.keys)
        return self.pages[m], self.slots[m]

    def tids(self, pred: Predicate) -> set[TupleId]:
        p, s = self.query(pred)
        return {TupleId(a, b) for a, b in zip(p.tolist(), s.tolist())}


@dataclass
class DenseIndex:
    keys: np.ndarray
    pages: np.ndarray
    slots: np.ndarray
    table_pages: int = -1

    @property
    def count(self) -> int:
        return int(self.keys.size)

    def check_fresh(self, table: TableFile) -> None:
        if self.table_pages >= 0 and table.num_pages != self.table_pages:
            raise StaleIndexError("dense index built on a different table state")

    def query(self, pred: Predicate) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = pred.bounds()
        if lo > hi:
            empty = np.zeros(0, dtype=np.int64)
            return empty, empty
        i = 0 if lo == -np.inf else int(np.searchsorted(self.keys, lo, side="left"))
        j = self.count if hi == np.inf else int(np.searchsorted(self.keys, hi, side="right"))
        return self.pages[i:j], self.slots[i:j]

    def tids(self, pred: Predicate) -> set[TupleId]:
        p, s = self.query(pred)
        return {TupleId(a, b) for a, b in zip(p.tolist(), s.tolist())}

    def save(self, path: str | Path) -> int:
        rec = np.empty(self.count, dtype=_DENSE_REC)
        rec["key"], rec["page"], rec["slot"] = self.keys, self.pages, self.slots
        data = _HDR.pack(b"HIPD", self.count) + rec.tobytes()
        Path(path).write_bytes(data)
        return len(data)

    @classmethod
    def load(cls, path: str | Path) -> DenseIndex:
        data = Path(path).read_bytes()
        if len(data) < _HDR.size:
            raise FormatError(f"{path}: truncated dense index")
        magic, count = _HDR.unpack_from(data)
        if magic != b"HIPD" or len(data) != _HDR.size + count * _DENSE_REC.itemsize:
            raise FormatError(f"{path}: not a dense index file")
        rec = np.frombuffer(data, dtype=_DENSE_REC, offset=_HDR.size)
        return cls(rec["key"].astype(np.int64), rec["page"].astype(np.int64),
                   rec["slot"].astype(np.int64))


def build_dense(table: TableFile) -> DenseIndex:
    keys, pages, slots = table.page_columns()
    if keys.size == 0:
        raise ValueError("cannot index an empty table")
    order = np.lexsort((slots, pages, keys))
    return DenseIndex(keys[order], pages[order], slots[order], table.num_pages)


def dense_query(index: DenseIndex, pred: Predicate) -> set[TupleId]:
    return index.tids(pred)


def dense_file_size(count: int) -> int:
    return _HDR.size + count * _DENSE_REC.itemsize
