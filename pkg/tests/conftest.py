from __future__ import annotations

import numpy as np
import pytest

from hippo.histogram import CompleteHistogram
from hippo.index import HippoIndex
from hippo.pagestore import TableFile

# Keys 1..100 split five ways: bucket 3 is "41 - 60".
AGE_BOUNDS = (1, 21, 41, 61, 81, 100)

# 30 pages of 5 tuples laid out so that, with H=5 and D=0.5, the build
# closes entries at pages 9, 24 and 29 with partials 01110, 01011, 11100.
AGE_PAGES = (
    [[21, 22, 55, 21, 55]] * 9
    + [[21, 22, 55, 75, 77]]
    + [[25, 65, 70, 30, 66]] * 14
    + [[25, 65, 85, 90, 30]]
    + [[5, 10, 25, 6, 26]] * 4
    + [[5, 25, 45, 10, 50]]
)


@pytest.fixture
def age_hist() -> CompleteHistogram:
    return CompleteHistogram(AGE_BOUNDS)


@pytest.fixture
def age_table(tmp_path):
    t = TableFile.create(tmp_path / "age.tbl", page_card=5)
    t.append_many([k for page in AGE_PAGES for k in page])
    yield t
    t.close()


@pytest.fixture
def age_index(tmp_path, age_table, age_hist):
    idx = HippoIndex.build(age_table, tmp_path / "age.idx", D=0.5, histogram=age_hist)
    yield idx
    idx.close()


@pytest.fixture
def uniform_table(tmp_path):
    rng = np.random.default_rng(7)
    t = TableFile.create(tmp_path / "u.tbl", page_card=20)
    t.append_many(rng.integers(0, 10_000, size=4000).tolist())
    yield t
    t.close()


def key_mask(keys: np.ndarray, atoms) -> np.ndarray:
    """Reference predicate evaluation, written independently of Predicate.mask."""
    from hippo.predicate import Equality

    m = np.ones(keys.shape, dtype=bool)
    for a in atoms:
        if isinstance(a, Equality):
            m &= keys == a.key
            continue
        if a.lo is not None:
            m &= keys >= a.lo if a.lo_inclusive else keys > a.lo
        if a.hi is not None:
            m &= keys <= a.hi if a.hi_inclusive else keys < a.hi
    return m


def scan_all(table: TableFile):
    """(keys, tids) of every live tuple via the per-tuple decoder."""
    tuples = list(table.scan())
    return np.array([t.key for t in tuples], dtype=np.int64), [t.tid for t in tuples]


def oracle(keys, tids, pred) -> set:
    m = key_mask(keys, pred.atoms)
    return {tids[i] for i in np.flatnonzero(m)}


# acceptance bookkeeping: criterion id -> list of (ok, detail)
_CRITERIA: dict[int, list[tuple[bool, str]]] = {}


@pytest.fixture
def record():
    def _record(cid: int, ok: bool, detail: str) -> None:
        _CRITERIA.setdefault(cid, []).append((bool(ok), detail))

    return _record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(_CRITERIA):
        parts = _CRITERIA[cid]
        verdict = "PASS" if all(ok for ok, _ in parts) else "FAIL"
        terminalreporter.write_line(
            f"criterion {cid}: {verdict}  " + "; ".join(d for _, d in parts))
