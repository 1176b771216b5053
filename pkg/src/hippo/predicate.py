"""Conjunctive key predicates and their conversion to hit-bucket bitmaps."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

import numpy as np

from hippo.bitset import BucketBitmap
from hippo.histogram import CompleteHistogram


@dataclass(frozen=True)
class Equality:
    key: int

    def as_range(self) -> Range:
        return Range(self.key, self.key, True, True)


@dataclass(frozen=True)
class Range:
    lo: int | None = None
    hi: int | None = None
    lo_inclusive: bool = True
    hi_inclusive: bool = True

    def __post_init__(self):
        if self.lo is not None and self.hi is not None:
            if self.lo > self.hi:
                raise ValueError(f"range lower bound {self.lo} above upper bound {self.hi}")
            if self.lo == self.hi and not (self.lo_inclusive and self.hi_inclusive):
                raise ValueError(f"range ({self.lo}, {self.hi}) is empty")

    def as_range(self) -> Range:
        return self

    def closed(self) -> tuple[float | int, float | int]:
        """Inclusive integer bounds, with infinities for missing ends."""
        lo = -np.inf if self.lo is None else (self.lo if self.lo_inclusive else self.lo + 1)
        hi = np.inf if self.hi is None else (self.hi if self.hi_inclusive else self.hi - 1)
        return lo, hi


Atom = Union[Equality, Range]


@dataclass(frozen=True)
class Predicate:
    """AND of one or more atoms on the single key attribute."""

    atoms: tuple[Atom, ...]

    def __post_init__(self):
        if not self.atoms:
            raise ValueError("a predicate needs at least one atom")

    @classmethod
    def of(cls, *atoms: Atom) -> Predicate:
        return cls(tuple(atoms))

    def bounds(self) -> tuple[float | int, float | int]:
        """Closed integer interval accepted by every atom (may be empty)."""
        lo, hi = -np.inf, np.inf
        for a in self.atoms:
            alo, ahi = a.as_range().closed()
            lo, hi = max(lo, alo), min(hi, ahi)
        return lo, hi

    def matches(self, key: int) -> bool:
        lo, hi = self.bounds()
        return lo <= key <= hi

    def mask(self, keys: np.ndarray) -> np.ndarray:
        lo, hi = self.bounds()
        keys = np.asarray(keys, dtype=np.int64)
        m = np.ones(keys.shape, dtype=bool)
        if lo != -np.inf:
            m &= keys >= lo
        if hi != np.inf:
            m &= keys <= hi
        return m

    def __str__(self) -> str:
        parts = []
        for a in self.atoms:
            if isinstance(a, Equality):
                parts.append(f"key = {a.key}")
                continue
            if a.lo is not None:
                parts.append(f"key {'>=' if a.lo_inclusive else '>'} {a.lo}")
            if a.hi is not None:
                parts.append(f"key {'<=' if a.hi_inclusive else '<'} {a.hi}")
            if a.lo is None and a.hi is None:
                parts.append("key >= " + str(np.iinfo(np.int64).min))
        return " AND ".join(parts)


def convert_predicate(pred: Predicate, hist: CompleteHistogram) -> BucketBitmap:
    """Bitmap of the buckets hit by every atom of pred."""
    hit: set[int] | None = None
    for atom in pred.atoms:
        r = atom.as_range()
        buckets = hist.buckets_hit_by_range(r.lo, r.hi, r.lo_inclusive, r.hi_inclusive)
        hit = buckets if hit is None else hit & buckets
    return BucketBitmap.from_buckets(hist.H, hit or ())


_ATOM = re.compile(r"^\s*key\s*(<=|>=|=|==|<|>)\s*(-?\d+)\s*$", re.IGNORECASE)


def parse_predicate(text: str) -> Predicate:
    """Parse e.g. ``key > 55 AND key < 65``."""
    atoms: list[Atom] = []
    for part in re.split(r"\s+AND\s+", text.strip(), flags=re.IGNORECASE):
        m = _ATOM.match(part)
        if not m:
            raise ValueError(f"cannot parse predicate atom {part!r}")
        op, n = m.group(1), int(m.group(2))
        if op in ("=", "=="):
            atoms.append(Equality(n))
        elif op == ">":
            atoms.append(Range(lo=n, lo_inclusive=False))
        elif op == ">=":
            atoms.append(Range(lo=n))
        elif op == "<":
            atoms.append(Range(hi=n, hi_inclusive=False))
        else:
            atoms.append(Range(hi=n))
    return Predicate(tuple(atoms))
