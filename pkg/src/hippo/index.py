"""
Hippo index: page ranges summarized by partial histograms.

Index file layout (little-endian):
  header     magic "HIPX", version u32, H u32, D in millionths u32,
             num_entries u64, sorted_list_offset u64, entries_offset u64,
             sorted_list_capacity u64, table path (u16 length + utf-8)
  histogram  H u32, (H+1) x i64 boundaries
  sorted     sorted_list_capacity x u64 entry addresses, the first
             num_entries of them in ascending start-page order
  entries    {start_page u64, end_page u64, enc_len u16, encoded bitmap}
             appended at the file tail; a relocated entry leaves its old
             record behind as garbage

One writer or many readers at a time; callers serialize mutations.
"""

from __future__ import annotations

import logging
import math
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from hippo.bitset import BucketBitmap, stack_words
from hippo.errors import FormatError, StaleIndexError
from hippo.histogram import CompleteHistogram, histogram_from_keys
from hippo.pagestore import TableFile, TupleId
from hippo.predicate import Predicate, convert_predicate

log = logging.getLogger(__name__)

MAGIC = b"HIPX"
VERSION = 1
DEFAULT_RESOLUTION = 400
DEFAULT_DENSITY = 0.2

_HDR = struct.Struct("<4sIIIQQQQH")
_ENTRY = struct.Struct("<QQH")
_ADDR = struct.Struct("<Q")
_NUM_ENTRIES_AT = 16  # num_entries, sorted_list_offset, entries_offset, capacity


@dataclass
class IndexEntry:
    start_page: int
    end_page: int
    partial: BucketBitmap
    addr: int = 0
    enc_len: int = 0

    @property
    def pages(self) -> range:
        return range(self.start_page, self.end_page + 1)


@dataclass
class SearchResult:
    pages: np.ndarray  # page of each qualifying tuple
    slots: np.ndarray
    keys: np.ndarray
    pages_inspected: int
    entries_selected: int

    def tids(self) -> set[TupleId]:
        return {TupleId(p, s) for p, s in zip(self.pages.tolist(), self.slots.tolist())}

    def __len__(self) -> int:
        return int(self.keys.size)


@dataclass
class InsertResult:
    tid: TupleId
    bucket: int
    probes: int
    action: str  # noop | updated | relocated | extended | new_entry


def _check_params(H: int, D: float) -> None:
    if H < 1:
        raise ValueError(f"resolution must be >= 1, got {H}")
    if not 0 < D <= 1:
        raise ValueError(f"density must be in (0, 1], got {D}")


class HippoIndex:
    def __init__(self, path: Path, fd: int, table: TableFile, hist: CompleteHistogram,
                 density: float, entries: list[IndexEntry], sorted_off: int,
                 entries_off: int, capacity: int, eof: int, owns_table: bool):
        self.path = path
        self._fd = fd
        self.table = table
        self.histogram = hist
        self.D = density
        self.entries = entries  # in sorted-list order
        self._sorted_off = sorted_off
        self._entries_off = entries_off
        self._capacity = capacity
        self._eof = eof
        self._owns_table = owns_table
        self._matrix: np.ndarray | None = None
        self._starts = [e.start_page for e in entries]

    @property
    def H(self) -> int:
        return self.histogram.H

    @property
    def num_entries(self) -> int:
        return len(self.entries)

    # ------------------------------------------------------------------
    # build / open
    # ------------------------------------------------------------------

    @classmethod
    def build(cls, table: TableFile, path: str | Path, H: int = DEFAULT_RESOLUTION,
              D: float = DEFAULT_DENSITY,
              histogram: CompleteHistogram | None = None) -> HippoIndex:
        """Summarize every page of table in one pass and write the index file.

        The complete histogram is computed from the table unless one is given,
        in which case H is taken from it.
        """
        if histogram is not None:
            H = histogram.H
        _check_params(H, D)
        keys, pages, _ = table.page_columns()
        if keys.size == 0:
            raise ValueError("cannot index an empty table")
        hist = histogram or histogram_from_keys(keys, H)
        entries = group_pages(hist.buckets_of(keys), pages, table.num_pages, H, D)
        return cls._write_new(Path(path), table, hist, D, entries)

    @classmethod
    def _write_new(cls, path: Path, table: TableFile, hist: CompleteHistogram,
                   D: float, entries: list[IndexEntry]) -> HippoIndex:
        tpath = str(Path(table.path).resolve()).encode()
        capacity = len(entries) + max(16, len(entries) // 8)
        hist_off = _HDR.size + len(tpath)
        sorted_off = hist_off + hist.nbytes
        entries_off = sorted_off + capacity * _ADDR.size
        body = bytearray()
        addrs = []
        for e in entries:
            enc = e.partial.encode()
            e.addr = entries_off + len(body)
            e.enc_len = len(enc)
            addrs.append(e.addr)
            body += _ENTRY.pack(e.start_page, e.end_page, len(enc)) + enc
        sorted_block = np.zeros(capacity, dtype="<u8")
        sorted_block[: len(addrs)] = addrs
        header = _HDR.pack(MAGIC, VERSION, hist.H, round(D * 1_000_000), len(entries),
                           sorted_off, entries_off, capacity, len(tpath)) + tpath
        data = header + hist.to_bytes() + sorted_block.tobytes() + bytes(body)
        fd = os.open(path, os.O_RDWR | os.O_CREAT | os.O_TRUNC, 0o644)
        os.pwrite(fd, data, 0)
        log.info("built %s: %d entries over %d pages", path, len(entries), table.num_pages)
        return cls(path, fd, table, hist, D, entries, sorted_off, entries_off,
                   capacity, len(data), owns_table=False)

    @classmethod
    def open(cls, path: str | Path, table: TableFile | None = None) -> HippoIndex:
        path = Path(path)
        fd = os.open(path, os.O_RDWR)
        try:
            size = os.fstat(fd).st_size
            raw = os.pread(fd, _HDR.size, 0)
            if len(raw) < _HDR.size:
                raise FormatError(f"{path}: truncated index header")
            (magic, version, H, d_micro, n, sorted_off, entries_off, capacity,
             plen) = _HDR.unpack(raw)
            if magic != MAGIC or version != VERSION:
                raise FormatError(f"{path}: not a hippo index file")
            tpath = os.pread(fd, plen, _HDR.size).decode()
            hist_raw = os.pread(fd, 4 + 8 * (H + 1), _HDR.size + plen)
            hist, _ = CompleteHistogram.from_bytes(hist_raw)
            if hist.H != H or n > capacity:
                raise FormatError(f"{path}: inconsistent header")
            addrs = np.frombuffer(os.pread(fd, 8 * n, sorted_off), dtype="<u8").tolist()
            entries = []
            for a in addrs:
                start, end, enc_len = _ENTRY.unpack(os.pread(fd, _ENTRY.size, a))
                if a + _ENTRY.size + enc_len > size:
                    raise FormatError(f"{path}: entry at {a} runs past end of file")
                enc = os.pread(fd, enc_len, a + _ENTRY.size)
                entries.append(IndexEntry(start, end, BucketBitmap.decode(enc, H), a, enc_len))
        except Exception:
            os.close(fd)
            raise
        owns = table is None
        if table is None:
            table = TableFile.open(tpath)
        return cls(path, fd, table, hist, d_micro / 1_000_000, entries, sorted_off,
                   entries_off, capacity, size, owns_table=owns)

    def close(self) -> None:
        if self._fd >= 0:
            os.close(self._fd)
            self._fd = -1
        if self._owns_table:
            self.table.close()

    def __enter__(self) -> HippoIndex:
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    @property
    def nbytes(self) -> int:
        return self._eof

    # ------------------------------------------------------------------
    # search
    # ------------------------------------------------------------------

    def check_fresh(self) -> None:
        covered = self.entries[-1].end_page + 1 if self.entries else 0
        if covered != self.table.num_pages:
            raise StaleIndexError(
                f"index covers {covered} pages but table has {self.table.num_pages}"
            )

    def _entry_matrix(self) -> np.ndarray:
        if self._matrix is None:
            self._matrix = stack_words([e.partial for e in self.entries], self.H)
        return self._matrix

    def _selected_entries(self, pred_bitmap: BucketBitmap) -> np.ndarray:
        if pred_bitmap.nbits != self.H:
            raise ValueError(f"predicate bitmap has {pred_bitmap.nbits} bits, index has {self.H}")
        return np.flatnonzero((self._entry_matrix() & pred_bitmap.words).any(axis=1))

    def filter_pages(self, pred_bitmap: BucketBitmap) -> np.ndarray:
        """Boolean page bitmap: True for pages of entries sharing a bucket with pred_bitmap."""
        marks = np.zeros(self.table.num_pages + 1, dtype=np.int64)
        for i in self._selected_entries(pred_bitmap).tolist():
            e = self.entries[i]
            marks[e.start_page] += 1
            marks[e.end_page + 1] -= 1
        return np.cumsum(marks[:-1]) > 0

    def search(self, pred: Predicate) -> SearchResult:
        self.check_fresh()
        qbm = convert_predicate(pred, self.histogram)
        selected = self._selected_entries(qbm)
        page_bitmap = self.filter_pages(qbm) if selected.size else np.zeros(self.table.num_pages, bool)
        page_ids = np.flatnonzero(page_bitmap)
        keys, pages, slots = self.table.page_columns(page_ids)
        m = pred.mask(keys)
        return SearchResult(pages[m], slots[m], keys[m], int(page_ids.size), int(selected.size))

    # ------------------------------------------------------------------
    # sorted list
    # ------------------------------------------------------------------

    def locate_entry(self, page_id: int) -> tuple[int | None, int]:
        """Binary search of the sorted list for the entry holding page_id.

        Returns (position in sorted order or None, number of probes).
        """
        lo, hi, probes = 0, len(self._starts), 0
        while lo < hi:
            mid = (lo + hi) // 2
            probes += 1
            if self._starts[mid] <= page_id:
                lo = mid + 1
            else:
                hi = mid
        pos = lo - 1
        if pos < 0 or page_id > self.entries[pos].end_page:
            return None, probes
        return pos, probes

    def physical_order(self) -> list[IndexEntry]:
        return sorted(self.entries, key=lambda e: e.addr)

    # ------------------------------------------------------------------
    # on-disk entry maintenance
    # ------------------------------------------------------------------

    def _write_header_counts(self) -> None:
        os.pwrite(self._fd, struct.pack("<QQQQ", len(self.entries), self._sorted_off,
                                        self._entries_off, self._capacity), _NUM_ENTRIES_AT)

    def _write_pointer(self, pos: int) -> None:
        os.pwrite(self._fd, _ADDR.pack(self.entries[pos].addr), self._sorted_off + 8 * pos)

    def _append_record(self, e: IndexEntry, enc: bytes) -> None:
        e.addr = self._eof
        e.enc_len = len(enc)
        rec = _ENTRY.pack(e.start_page, e.end_page, len(enc)) + enc
        os.pwrite(self._fd, rec, e.addr)
        self._eof += len(rec)

    def _store(self, pos: int) -> bool:
        """Persist entry pos in place if it fits, else at the tail. True if moved."""
        e = self.entries[pos]
        enc = e.partial.encode()
        self._matrix = None
        if len(enc) <= e.enc_len:
            e.enc_len = len(enc)
            os.pwrite(self._fd, _ENTRY.pack(e.start_page, e.end_page, len(enc)) + enc, e.addr)
            return False
        self._append_record(e, enc)
        self._write_pointer(pos)
        return True

    def _add_entry(self, e: IndexEntry) -> None:
        if len(self.entries) == self._capacity:
            # move the sorted list to the tail with room to grow
            self._capacity *= 2
            self._sorted_off = self._eof
            block = np.zeros(self._capacity, dtype="<u8")
            block[: len(self.entries)] = [x.addr for x in self.entries]
            os.pwrite(self._fd, block.tobytes(), self._sorted_off)
            self._eof += block.nbytes
        self._append_record(e, e.partial.encode())
        self.entries.append(e)
        self._starts.append(e.start_page)
        self._write_pointer(len(self.entries) - 1)
        self._write_header_counts()
        self._matrix = None

    # ------------------------------------------------------------------
    # maintenance
    # ------------------------------------------------------------------

    def insert(self, key: int, payload: bytes = b"", page: int | None = None) -> InsertResult:
        """Add a tuple to the table and update the index eagerly.

        The tuple is appended unless page names an existing page with a free slot.
        """
        self.check_fresh()
        bucket = self.histogram.bucket_of(key)
        tid = self.table.append_tuple(key, payload, page)
        pos, probes = self.locate_entry(tid.page)
        if pos is not None:
            e = self.entries[pos]
            if e.partial.has(bucket):
                return InsertResult(tid, bucket, probes, "noop")
            e.partial.set_bucket(bucket)
            moved = self._store(pos)
            return InsertResult(tid, bucket, probes, "relocated" if moved else "updated")
        last = self.entries[-1]
        if last.partial.density() < self.D:
            last.end_page = tid.page
            last.partial.set_bucket(bucket)
            self._store(len(self.entries) - 1)
            return InsertResult(tid, bucket, probes, "extended")
        self._add_entry(IndexEntry(tid.page, tid.page, BucketBitmap.from_buckets(self.H, [bucket])))
        return InsertResult(tid, bucket, probes, "new_entry")

    def vacuum(self) -> list[tuple[int, int]]:
        """Re-summarize entries whose pages carry deletion notes.

        Returns the page ranges that were re-summarized.
        """
        self.check_fresh()
        flags = self.table.deletion_flags()
        done = []
        for pos, e in enumerate(self.entries):
            dirty = [p for p in e.pages if flags[p]]
            if not dirty:
                continue
            for p in dirty:
                self.table.vacuum_page(p)
            keys = self.table.page_columns(np.arange(e.start_page, e.end_page + 1))[0]
            e.partial = BucketBitmap.from_bucket_array(self.H, self.histogram.buckets_of(keys))
            self._store(pos)
            done.append((e.start_page, e.end_page))
        return done


def group_pages(buckets: np.ndarray, pages: np.ndarray, num_pages: int, H: int,
                D: float) -> list[IndexEntry]:
    """Density-driven page grouping.

    buckets/pages give the bucket and page of every live tuple, ordered by page.
    An entry always includes the page just summarized and is closed as soon as
    its density exceeds D; the last working entry is flushed regardless.
    """
    bounds = np.searchsorted(pages, np.arange(num_pages + 1))
    working = np.zeros(H + 1, dtype=bool)
    count = 0
    start = 0
    entries = []
    for p in range(num_pages):
        b = buckets[bounds[p] : bounds[p + 1]]
        if b.size:
            fresh = np.unique(b[~working[b]])
            working[fresh] = True
            count += fresh.size
        if count / H > D:
            entries.append(IndexEntry(start, p, BucketBitmap.from_bucket_array(H, np.flatnonzero(working))))
            working[:] = False
            count = 0
            start = p + 1
    if start < num_pages:
        entries.append(IndexEntry(start, num_pages - 1,
                                  BucketBitmap.from_bucket_array(H, np.flatnonzero(working))))
    return entries


def build_index(table: TableFile, path: str | Path, H: int = DEFAULT_RESOLUTION,
                D: float = DEFAULT_DENSITY,
                histogram: CompleteHistogram | None = None) -> HippoIndex:
    return HippoIndex.build(table, path, H, D, histogram)


def max_probes(num_entries: int) -> int:
    return math.ceil(math.log2(max(num_entries, 1))) + 1
