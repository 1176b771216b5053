"""Complete equi-depth (height-balanced) histogram over the indexed key."""

from __future__ import annotations

import bisect
import struct
from dataclasses import dataclass

import numpy as np

from hippo.errors import FormatError

_H = struct.Struct("<I")


@dataclass(frozen=True)
class CompleteHistogram:
    """H buckets over H+1 non-decreasing boundaries.

    Bucket i (1-based) covers [b[i-1], b[i]); the last bucket is closed,
    [b[H-1], b[H]].  Keys outside [b[0], b[H]] clamp to bucket 1 or H.
    """

    boundaries: tuple[int, ...]

    def __post_init__(self):
        b = self.boundaries
        if len(b) < 2:
            raise ValueError("a histogram needs at least one bucket")
        if any(b[i] > b[i + 1] for i in range(len(b) - 1)):
            raise ValueError("boundaries must be non-decreasing")

    @property
    def H(self) -> int:
        return len(self.boundaries) - 1

    def bucket_of(self, key: int) -> int:
        b = self.boundaries
        pos = bisect.bisect_left(b, key)
        # a key equal to a boundary goes to the first bucket starting there
        if pos < len(b) and b[pos] == key:
            bucket = pos + 1
        else:
            bucket = pos
        return min(max(bucket, 1), self.H)

    def buckets_of(self, keys: np.ndarray) -> np.ndarray:
        """Vectorised bucket_of."""
        b = np.asarray(self.boundaries, dtype=np.int64)
        keys = np.asarray(keys, dtype=np.int64)
        pos = np.searchsorted(b, keys, side="left")
        hit = (pos < b.size) & (b[np.minimum(pos, b.size - 1)] == keys)
        return np.clip(pos + hit, 1, self.H)

    def buckets_hit_by_range(
        self,
        lo: int | None = None,
        hi: int | None = None,
        lo_inclusive: bool = True,
        hi_inclusive: bool = True,
    ) -> set[int]:
        """Buckets whose interval intersects the predicate interval.

        Keys are integers, so the predicate is first narrowed to the closed
        integer range it admits; bucket_of is monotone, which makes the hit set
        the contiguous run between the buckets of the two ends.
        """
        if lo is not None and hi is not None and lo > hi:
            raise ValueError(f"empty range: lo={lo} > hi={hi}")
        first = 1 if lo is None else self.bucket_of(lo if lo_inclusive else lo + 1)
        last = self.H if hi is None else self.bucket_of(hi if hi_inclusive else hi - 1)
        # an integer-empty range such as (5, 6) still touches one bucket
        if first > last:
            first, last = last, first
        return set(range(first, last + 1))

    def bucket_interval(self, bucket: int) -> tuple[int, int, bool]:
        """(lower, upper, upper_inclusive) for a 1-based bucket id."""
        if not 1 <= bucket <= self.H:
            raise ValueError(f"bucket {bucket} out of 1..{self.H}")
        return self.boundaries[bucket - 1], self.boundaries[bucket], bucket == self.H

    def to_bytes(self) -> bytes:
        return _H.pack(self.H) + np.asarray(self.boundaries, dtype="<i8").tobytes()

    @classmethod
    def from_bytes(cls, data: bytes, offset: int = 0) -> tuple[CompleteHistogram, int]:
        """Decode a histogram block; returns it and the offset just past it."""
        if len(data) < offset + _H.size:
            raise FormatError("truncated histogram block")
        (h,) = _H.unpack_from(data, offset)
        end = offset + _H.size + 8 * (h + 1)
        if h < 1 or len(data) < end:
            raise FormatError("truncated histogram block")
        b = np.frombuffer(data, dtype="<i8", count=h + 1, offset=offset + _H.size)
        return cls(tuple(int(x) for x in b)), end

    @property
    def nbytes(self) -> int:
        return _H.size + 8 * (self.H + 1)


def histogram_from_keys(keys, H: int) -> CompleteHistogram:
    """Boundary k is the sorted key at index floor(k*Card/H); the last is the max."""
    keys = np.sort(np.asarray(keys, dtype=np.int64))
    card = keys.size
    if card == 0:
        raise ValueError("cannot build a histogram over an empty table")
    if H < 1 or H > card:
        raise ValueError(f"H must be in 1..{card}, got {H}")
    idx = (np.arange(H, dtype=np.int64) * card) // H
    bounds = [int(x) for x in keys[idx]]
    bounds.append(int(keys[-1]))
    return CompleteHistogram(tuple(bounds))


def build_histogram(table, H: int) -> CompleteHistogram:
    return histogram_from_keys(table.all_keys(), H)
