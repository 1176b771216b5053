"""Hippo: a sparse index of page ranges summarized by partial histograms."""

from hippo.bitset import BucketBitmap
from hippo.histogram import CompleteHistogram, build_histogram
from hippo.index import HippoIndex, IndexEntry, build_index
from hippo.pagestore import TableFile, TupleId, create_table, open_table
from hippo.predicate import Equality, Predicate, Range, convert_predicate, parse_predicate

__all__ = [
    "BucketBitmap",
    "CompleteHistogram",
    "Equality",
    "HippoIndex",
    "IndexEntry",
    "Predicate",
    "Range",
    "TableFile",
    "TupleId",
    "build_histogram",
    "build_index",
    "convert_predicate",
    "create_table",
    "open_table",
    "parse_predicate",
]

__version__ = "0.1.0"
