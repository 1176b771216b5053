"""
Slotted heap-page table file.

File layout (little-endian):
  page 0    header: magic "HIPT", version u32, page_card u32, page_size u32,
            num_pages u64, zero padded to page_size
  page 1..  data pages, each page_size bytes:
              [0:2]  tuple_count u16 (slots in use, dead ones included)
              [2]    has_deletions u8
              [3..]  slot directory, (offset u16, dead u8) per slot
              [.. end] tuple records growing down from the page end:
                       key i64, payload_len u16, payload bytes

A tuple id is (page_id, slot) with page_id counted from the first data page.
Deletes only set the slot's dead byte and the page-header flag; space is
reclaimed by vacuum_page, which renumbers the surviving slots.

Single writer, many readers; no locking is done here.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from hippo.errors import FormatError, PageOutOfRange, TupleNotFound

PAGE_SIZE = 8192
MAGIC = b"HIPT"
VERSION = 1

_FILE_HDR = struct.Struct("<4sIIIQ")
_PAGE_HDR = struct.Struct("<HB")
_SLOT = struct.Struct("<HB")
_REC = struct.Struct("<qH")

_NUM_PAGES_OFFSET = 16  # byte offset of num_pages inside the file header


class TupleId(NamedTuple):
    page: int
    slot: int


class Tuple(NamedTuple):
    tid: TupleId
    key: int
    payload: bytes


@dataclass
class Slot:
    key: int
    payload: bytes = b""
    dead: bool = False


@dataclass
class Page:
    page_id: int
    slots: list[Slot] = field(default_factory=list)
    has_deletions: bool = False

    @property
    def tuple_count(self) -> int:
        return len(self.slots)

    def live(self) -> list[Tuple]:
        return [
            Tuple(TupleId(self.page_id, i), s.key, s.payload)
            for i, s in enumerate(self.slots)
            if not s.dead
        ]

    def to_bytes(self, page_size: int = PAGE_SIZE) -> bytes:
        buf = bytearray(page_size)
        _PAGE_HDR.pack_into(buf, 0, len(self.slots), int(self.has_deletions))
        end = page_size
        for i, s in enumerate(self.slots):
            rec = _REC.pack(s.key, len(s.payload)) + s.payload
            end -= len(rec)
            if end < _PAGE_HDR.size + _SLOT.size * len(self.slots):
                raise ValueError(f"page {self.page_id} overflows {page_size} bytes")
            buf[end : end + len(rec)] = rec
            _SLOT.pack_into(buf, _PAGE_HDR.size + _SLOT.size * i, end, int(s.dead))
        return bytes(buf)

    @classmethod
    def from_bytes(cls, page_id: int, data: bytes) -> Page:
        count, flag = _PAGE_HDR.unpack_from(data, 0)
        slots = []
        for i in range(count):
            off, dead = _SLOT.unpack_from(data, _PAGE_HDR.size + _SLOT.size * i)
            key, plen = _REC.unpack_from(data, off)
            start = off + _REC.size
            slots.append(Slot(key, bytes(data[start : start + plen]), bool(dead)))
        return cls(page_id, slots, bool(flag))


def max_payload(page_card: int, page_size: int = PAGE_SIZE) -> int:
    """Largest payload that still lets page_card tuples share one page."""
    free = page_size - _PAGE_HDR.size - page_card * (_SLOT.size + _REC.size)
    return free // page_card


class TableFile:
    """A heap table of fixed-size slotted pages holding (key, payload) tuples."""

    def __init__(self, path: str | Path, fd: int, page_card: int, page_size: int, num_pages: int):
        self.path = Path(path)
        self._fd = fd
        self.page_card = page_card
        self.page_size = page_size
        self._num_pages = num_pages
        self._map: np.ndarray | None = None

    # ------------------------------------------------------------------
    # lifecycle
    # ------------------------------------------------------------------

    @classmethod
    def create(cls, path: str | Path, page_card: int, page_size: int = PAGE_SIZE) -> TableFile:
        if page_card < 1:
            raise ValueError("page_card must be >= 1")
        if page_card > 0xFFFF or max_payload(page_card, page_size) < 0:
            raise ValueError(f"{page_card} tuples do not fit in a {page_size}-byte page")
        fd = os.open(path, os.O_RDWR | os.O_CREAT | os.O_TRUNC, 0o644)
        hdr = bytearray(page_size)
        _FILE_HDR.pack_into(hdr, 0, MAGIC, VERSION, page_card, page_size, 0)
        os.pwrite(fd, bytes(hdr), 0)
        return cls(path, fd, page_card, page_size, 0)

    @classmethod
    def open(cls, path: str | Path) -> TableFile:
        fd = os.open(path, os.O_RDWR)
        try:
            raw = os.pread(fd, _FILE_HDR.size, 0)
            if len(raw) < _FILE_HDR.size:
                raise FormatError(f"{path}: truncated table header")
            magic, version, page_card, page_size, num_pages = _FILE_HDR.unpack(raw)
            if magic != MAGIC or version != VERSION:
                raise FormatError(f"{path}: not a table file")
            if os.fstat(fd).st_size < page_size * (num_pages + 1):
                raise FormatError(f"{path}: file shorter than its header claims")
        except Exception:
            os.close(fd)
            raise
        return cls(path, fd, page_card, page_size, num_pages)

    def close(self) -> None:
        self._map = None
        if self._fd >= 0:
            os.close(self._fd)
            self._fd = -1

    def __enter__(self) -> TableFile:
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    @property
    def num_pages(self) -> int:
        return self._num_pages

    @property
    def max_payload(self) -> int:
        return max_payload(self.page_card, self.page_size)

    # ------------------------------------------------------------------
    # raw page I/O
    # ------------------------------------------------------------------

    def _check_page(self, page_id: int) -> None:
        if not 0 <= page_id < self._num_pages:
            raise PageOutOfRange(f"page {page_id} not in table of {self._num_pages} pages")

    def _offset(self, page_id: int) -> int:
        return (page_id + 1) * self.page_size

    def read_raw(self, page_id: int) -> bytes:
        self._check_page(page_id)
        return os.pread(self._fd, self.page_size, self._offset(page_id))

    def read_page(self, page_id: int) -> Page:
        return Page.from_bytes(page_id, self.read_raw(page_id))

    def write_page(self, page: Page) -> None:
        self._check_page(page.page_id)
        os.pwrite(self._fd, page.to_bytes(self.page_size), self._offset(page.page_id))

    def _set_num_pages(self, n: int) -> None:
        self._num_pages = n
        os.pwrite(self._fd, struct.pack("<Q", n), _NUM_PAGES_OFFSET)

    def _pages_view(self) -> np.ndarray:
        """All data pages as a (num_pages, page_size) uint8 array backed by mmap."""
        if self._map is None or self._map.shape[0] != self._num_pages:
            if self._num_pages == 0:
                self._map = np.zeros((0, self.page_size), dtype=np.uint8)
            else:
                self._map = np.memmap(
                    self.path, dtype=np.uint8, mode="r", offset=self.page_size,
                    shape=(self._num_pages, self.page_size),
                )
        return self._map

    # ------------------------------------------------------------------
    # tuple operations
    # ------------------------------------------------------------------

    def _check_payload(self, payload: bytes) -> None:
        if len(payload) > self.max_payload:
            raise ValueError(
                f"payload of {len(payload)} bytes exceeds {self.max_payload} "
                f"(page_card={self.page_card}, page_size={self.page_size})"
            )

    def _put(self, page_id: int, rec: bytes) -> TupleId | None:
        """Write rec into a free slot of page_id; None if the page is full."""
        buf = bytearray(self.read_raw(page_id))
        count, _ = _PAGE_HDR.unpack_from(buf, 0)
        if count >= self.page_card:
            return None
        low = self.page_size
        for i in range(count):
            off, _ = _SLOT.unpack_from(buf, _PAGE_HDR.size + _SLOT.size * i)
            low = min(low, off)
        off = low - len(rec)
        buf[off : off + len(rec)] = rec
        _SLOT.pack_into(buf, _PAGE_HDR.size + _SLOT.size * count, off, 0)
        struct.pack_into("<H", buf, 0, count + 1)
        os.pwrite(self._fd, bytes(buf), self._offset(page_id))
        return TupleId(page_id, count)

    def append_tuple(self, key: int, payload: bytes = b"", page_id: int | None = None) -> TupleId:
        """Place a tuple in the last page if it has a free slot, else in a new page.

        With page_id, the tuple goes into that existing page instead (which
        must have a free slot, e.g. after a vacuum).
        """
        self._check_payload(payload)
        rec = _REC.pack(key, len(payload)) + payload
        if page_id is not None:
            self._check_page(page_id)
            tid = self._put(page_id, rec)
            if tid is None:
                raise ValueError(f"page {page_id} has no free slot")
            return tid
        if self._num_pages:
            tid = self._put(self._num_pages - 1, rec)
            if tid is not None:
                return tid
        page = Page(self._num_pages, [Slot(key, payload)])
        os.pwrite(self._fd, page.to_bytes(self.page_size), self._offset(page.page_id))
        self._set_num_pages(self._num_pages + 1)
        return TupleId(page.page_id, 0)

    def append_many(self, keys: Iterable[int], payloads: Sequence[bytes] | None = None) -> None:
        """Bulk append; same placement as repeated append_tuple, fewer writes."""
        keys = [int(k) for k in keys]
        if payloads is None:
            payloads = [b""] * len(keys)
        if len(payloads) != len(keys):
            raise ValueError("keys and payloads differ in length")
        for p in payloads:
            self._check_payload(p)
        i = 0
        # top up a partially filled last page tuple by tuple
        if self._num_pages:
            last = self.read_page(self._num_pages - 1)
            while i < len(keys) and last.tuple_count < self.page_card:
                self.append_tuple(keys[i], payloads[i])
                last.slots.append(Slot(keys[i]))
                i += 1
        chunk: list[bytes] = []
        first = self._num_pages
        while i < len(keys):
            j = min(i + self.page_card, len(keys))
            page = Page(first + len(chunk), [Slot(k, p) for k, p in zip(keys[i:j], payloads[i:j])])
            chunk.append(page.to_bytes(self.page_size))
            i = j
            if len(chunk) >= 1024:
                os.pwrite(self._fd, b"".join(chunk), self._offset(first))
                first += len(chunk)
                self._set_num_pages(first)
                chunk = []
        if chunk:
            os.pwrite(self._fd, b"".join(chunk), self._offset(first))
            self._set_num_pages(first + len(chunk))

    def delete_tuple(self, tid: TupleId | tuple[int, int]) -> None:
        page_id, slot = tid
        if not 0 <= page_id < self._num_pages:
            raise TupleNotFound(f"no tuple {tuple(tid)}")
        buf = bytearray(self.read_raw(page_id))
        count, _ = _PAGE_HDR.unpack_from(buf, 0)
        if not 0 <= slot < count:
            raise TupleNotFound(f"no tuple {tuple(tid)}")
        pos = _PAGE_HDR.size + _SLOT.size * slot
        off, dead = _SLOT.unpack_from(buf, pos)
        if dead:
            raise TupleNotFound(f"tuple {tuple(tid)} already deleted")
        _SLOT.pack_into(buf, pos, off, 1)
        buf[2] = 1
        os.pwrite(self._fd, bytes(buf), self._offset(page_id))

    def scan_page(self, page_id: int) -> list[Tuple]:
        return self.read_page(page_id).live()

    def has_deletions(self, page_id: int) -> bool:
        self._check_page(page_id)
        return os.pread(self._fd, 3, self._offset(page_id))[2] != 0

    def vacuum_page(self, page_id: int) -> None:
        page = self.read_page(page_id)
        if not page.has_deletions and not any(s.dead for s in page.slots):
            return
        page.slots = [s for s in page.slots if not s.dead]
        page.has_deletions = False
        self.write_page(page)

    # ------------------------------------------------------------------
    # vectorised reads
    # ------------------------------------------------------------------

    def page_columns(self, page_ids: np.ndarray | Sequence[int] | None = None):
        """Live tuples of the given pages (default: all) as parallel arrays.

        Returns (keys int64, pages int64, slots int64), ordered by page then slot.
        """
        view = self._pages_view()
        if page_ids is None:
            page_ids = np.arange(self._num_pages, dtype=np.int64)
        else:
            page_ids = np.asarray(page_ids, dtype=np.int64)
            if page_ids.size and (page_ids.min() < 0 or page_ids.max() >= self._num_pages):
                raise PageOutOfRange("page id out of range")
        empty = np.zeros(0, dtype=np.int64)
        if page_ids.size == 0:
            return empty, empty, empty
        pc = self.page_card
        out_k, out_p, out_s = [], [], []
        # bounded batches keep the gathered (n, pc, 8) buffer small
        step = max(1, (1 << 22) // (pc * 16))
        base = _PAGE_HDR.size + _SLOT.size * np.arange(pc)
        for b in range(0, page_ids.size, step):
            ids = page_ids[b : b + step]
            v = view[ids]
            counts = v[:, 0].astype(np.int64) | (v[:, 1].astype(np.int64) << 8)
            offs = v[:, base].astype(np.int64) | (v[:, base + 1].astype(np.int64) << 8)
            dead = v[:, base + 2]
            valid = (np.arange(pc)[None, :] < counts[:, None]) & (dead == 0)
            offs = np.where(valid, offs, 0)
            gather = offs[:, :, None] + np.arange(8)[None, None, :]
            raw = np.take_along_axis(v, gather.reshape(len(ids), -1), axis=1)
            keys = np.ascontiguousarray(raw).view("<i8").reshape(len(ids), pc)
            rows, cols = np.nonzero(valid)
            out_k.append(keys[rows, cols])
            out_p.append(ids[rows])
            out_s.append(cols.astype(np.int64))
        return np.concatenate(out_k), np.concatenate(out_p), np.concatenate(out_s)

    def deletion_flags(self) -> np.ndarray:
        """has_deletions of every page as a bool array."""
        return self._pages_view()[:, 2] != 0

    def page_keys(self, page_id: int) -> np.ndarray:
        self._check_page(page_id)
        return self.page_columns([page_id])[0]

    def all_keys(self) -> np.ndarray:
        return self.page_columns()[0]

    def live_count(self) -> int:
        return int(self.all_keys().size)

    def scan(self) -> Iterable[Tuple]:
        for p in range(self._num_pages):
            yield from self.scan_page(p)


def create_table(path: str | Path, page_card: int, page_size: int = PAGE_SIZE) -> TableFile:
    return TableFile.create(path, page_card, page_size)


def open_table(path: str | Path) -> TableFile:
    return TableFile.open(path)
