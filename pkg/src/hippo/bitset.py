"""
Fixed-width bucket bitmaps: bit i-1 stands for histogram bucket i.

Encoded form is a one-byte tag followed by a body:
  tag 0  raw     ceil(nbits/8) bytes, least significant bit first
  tag 1  runs    first bit value (one byte), then LEB128 run lengths of
                 alternating values
encode() picks whichever is shorter (raw on ties), so equal bitmaps always
encode to equal bytes and no encoding exceeds ceil(nbits/8) + 1 bytes.
"""

from __future__ import annotations

from typing import Iterable

import numpy as np

from hippo.errors import FormatError

WORD_BITS = 64
TAG_RAW = 0
TAG_RUNS = 1


def _write_varint(n: int, out: bytearray) -> None:
    while True:
        byte = n & 0x7F
        n >>= 7
        if n:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return


def _read_varint(data: bytes, pos: int) -> tuple[int, int]:
    n = shift = 0
    while True:
        if pos >= len(data):
            raise FormatError("truncated varint")
        byte = data[pos]
        pos += 1
        n |= (byte & 0x7F) << shift
        if not byte & 0x80:
            return n, pos
        shift += 7
        if shift > 63:
            raise FormatError("varint too long")


class BucketBitmap:
    __slots__ = ("nbits", "words")

    def __init__(self, nbits: int, words: np.ndarray | None = None):
        if nbits < 1:
            raise ValueError("nbits must be >= 1")
        self.nbits = nbits
        nwords = -(-nbits // WORD_BITS)
        if words is None:
            words = np.zeros(nwords, dtype=np.uint64)
        elif words.shape != (nwords,):
            raise ValueError(f"expected {nwords} words, got {words.shape}")
        self.words = words

    @classmethod
    def from_buckets(cls, nbits: int, buckets: Iterable[int]) -> BucketBitmap:
        bm = cls(nbits)
        for b in buckets:
            bm.set_bucket(int(b))
        return bm

    @classmethod
    def from_bucket_array(cls, nbits: int, buckets: np.ndarray) -> BucketBitmap:
        """Fast path for many (possibly repeated) bucket ids."""
        buckets = np.asarray(buckets, dtype=np.int64)
        if buckets.size and (buckets.min() < 1 or buckets.max() > nbits):
            raise ValueError(f"bucket id out of 1..{nbits}")
        bits = np.zeros(-(-nbits // WORD_BITS) * WORD_BITS, dtype=np.uint8)
        bits[buckets - 1] = 1
        return cls(nbits, np.packbits(bits, bitorder="little").view("<u8").astype(np.uint64))

    @classmethod
    def from_string(cls, s: str) -> BucketBitmap:
        """'01110' means buckets 2, 3 and 4 of five."""
        return cls.from_buckets(len(s), [i + 1 for i, c in enumerate(s) if c == "1"])

    @classmethod
    def full(cls, nbits: int) -> BucketBitmap:
        return cls.from_buckets(nbits, range(1, nbits + 1))

    def copy(self) -> BucketBitmap:
        return BucketBitmap(self.nbits, self.words.copy())

    # ------------------------------------------------------------------

    def _check(self, bucket: int) -> None:
        if not 1 <= bucket <= self.nbits:
            raise ValueError(f"bucket {bucket} out of 1..{self.nbits}")

    def set_bucket(self, bucket: int) -> None:
        self._check(bucket)
        i = bucket - 1
        self.words[i // WORD_BITS] |= np.uint64(1 << (i % WORD_BITS))

    def has(self, bucket: int) -> bool:
        self._check(bucket)
        i = bucket - 1
        return bool(int(self.words[i // WORD_BITS]) >> (i % WORD_BITS) & 1)

    def buckets(self) -> list[int]:
        return [int(i) + 1 for i in np.flatnonzero(self.to_bits())]

    def to_bits(self) -> np.ndarray:
        return np.unpackbits(self.words.view(np.uint8), bitorder="little")[: self.nbits]

    def count_ones(self) -> int:
        return int(np.bitwise_count(self.words).sum())

    def density(self) -> float:
        return self.count_ones() / self.nbits

    def _same_width(self, other: BucketBitmap) -> None:
        if self.nbits != other.nbits:
            raise ValueError(f"bitmap widths differ: {self.nbits} vs {other.nbits}")

    def intersects(self, other: BucketBitmap) -> bool:
        self._same_width(other)
        for a, b in zip(self.words.tolist(), other.words.tolist()):
            if a & b:
                return True
        return False

    def __and__(self, other: BucketBitmap) -> BucketBitmap:
        self._same_width(other)
        return BucketBitmap(self.nbits, self.words & other.words)

    def __or__(self, other: BucketBitmap) -> BucketBitmap:
        self._same_width(other)
        return BucketBitmap(self.nbits, self.words | other.words)

    def __ior__(self, other: BucketBitmap) -> BucketBitmap:
        self._same_width(other)
        self.words |= other.words
        return self

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BucketBitmap):
            return NotImplemented
        return self.nbits == other.nbits and bool(np.array_equal(self.words, other.words))

    def __hash__(self):
        return hash((self.nbits, self.words.tobytes()))

    def __str__(self) -> str:
        return "".join("1" if b else "0" for b in self.to_bits())

    def __repr__(self) -> str:
        return f"BucketBitmap({self.nbits}, {self})"

    # ------------------------------------------------------------------
    # encoding
    # ------------------------------------------------------------------

    def _raw(self) -> bytes:
        return self.words.astype("<u8").tobytes()[: -(-self.nbits // 8)]

    def _runs(self) -> bytes:
        bits = self.to_bits()
        change = np.flatnonzero(np.diff(bits)) + 1
        edges = np.concatenate(([0], change, [self.nbits]))
        out = bytearray([int(bits[0])])
        for n in np.diff(edges).tolist():
            _write_varint(n, out)
        return bytes(out)

    def encode(self) -> bytes:
        raw = self._raw()
        runs = self._runs()
        if len(runs) < len(raw):
            return bytes([TAG_RUNS]) + runs
        return bytes([TAG_RAW]) + raw

    @classmethod
    def decode(cls, data: bytes, nbits: int) -> BucketBitmap:
        if not data:
            raise FormatError("empty bitmap encoding")
        tag, body = data[0], bytes(data[1:])
        nbytes = -(-nbits // 8)
        if tag == TAG_RAW:
            if len(body) != nbytes:
                raise FormatError(f"raw bitmap needs {nbytes} bytes, got {len(body)}")
            if nbits % 8 and body[-1] >> (nbits % 8):
                raise FormatError("padding bits set in raw bitmap")
            buf = np.zeros(-(-nbits // WORD_BITS) * 8, dtype=np.uint8)
            buf[:nbytes] = np.frombuffer(body, dtype=np.uint8)
            return cls(nbits, buf.view("<u8").astype(np.uint64))
        if tag == TAG_RUNS:
            if not body or body[0] > 1:
                raise FormatError("bad run-length header")
            value, pos, total = body[0], 1, 0
            bits = np.zeros(nbits, dtype=np.uint8)
            while pos < len(body):
                n, pos = _read_varint(body, pos)
                if n == 0 or total + n > nbits:
                    raise FormatError("bad run length")
                bits[total : total + n] = value
                total += n
                value ^= 1
            if total != nbits:
                raise FormatError(f"runs cover {total} bits, expected {nbits}")
            return cls.from_bucket_array(nbits, np.flatnonzero(bits) + 1)
        raise FormatError(f"unknown bitmap tag {tag}")


def stack_words(bitmaps: list[BucketBitmap], nbits: int) -> np.ndarray:
    """(len(bitmaps), words) uint64 matrix for bulk AND tests."""
    nwords = -(-nbits // WORD_BITS)
    if not bitmaps:
        return np.zeros((0, nwords), dtype=np.uint64)
    return np.stack([b.words for b in bitmaps])
