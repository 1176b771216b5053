from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hippo.histogram import histogram_from_keys
from hippo.predicate import Equality, Predicate, Range, convert_predicate, parse_predicate

from conftest import key_mask


def test_equality_bitmap(age_hist):
    assert str(convert_predicate(Predicate.of(Equality(55)), age_hist)) == "00100"


def test_conjunction_bitmap(age_hist):
    p = parse_predicate("key > 55 AND key < 65")
    assert str(convert_predicate(p, age_hist)) == "00110"


def test_clamped_bitmap(age_hist):
    assert str(convert_predicate(parse_predicate("key > 200"), age_hist)) == "00001"


def test_contradiction_gives_zero_bitmap(age_hist):
    p = parse_predicate("key < 10 AND key > 90")
    assert convert_predicate(p, age_hist).count_ones() == 0
    assert not p.matches(5)


def test_parse_forms():
    p = parse_predicate("KEY >= -3 and key<=7 AND key == 4")
    assert p.atoms == (Range(lo=-3), Range(hi=7), Equality(4))
    assert parse_predicate("key < 5").atoms == (Range(hi=5, hi_inclusive=False),)
    assert str(parse_predicate("key > 5 AND key <= 9")) == "key > 5 AND key <= 9"
    for bad in ("", "key ~ 4", "age = 5", "key = x", "key > 5 OR key < 2"):
        with pytest.raises(ValueError):
            parse_predicate(bad)


def test_range_validation():
    with pytest.raises(ValueError):
        Range(5, 4)
    with pytest.raises(ValueError):
        Range(5, 5, lo_inclusive=False)
    with pytest.raises(ValueError):
        Predicate(())


def test_mask_matches_reference():
    keys = np.arange(-20, 20)
    p = parse_predicate("key > -5 AND key <= 11 AND key < 30")
    assert p.mask(keys).tolist() == key_mask(keys, p.atoms).tolist()
    assert [p.matches(int(k)) for k in keys] == key_mask(keys, p.atoms).tolist()


atom = st.one_of(
    st.builds(Equality, st.integers(-120, 120)),
    st.builds(lambda a, ai: Range(lo=a, lo_inclusive=ai), st.integers(-120, 120), st.booleans()),
    st.builds(lambda a, ai: Range(hi=a, hi_inclusive=ai), st.integers(-120, 120), st.booleans()),
)


@settings(max_examples=300, deadline=None)
@given(st.lists(st.integers(-100, 100), min_size=5, max_size=80), st.integers(1, 8),
       st.lists(atom, min_size=1, max_size=3))
def test_soundness(keys, H, atoms):
    # every key satisfying the predicate falls in a bucket the bitmap marks
    H = min(H, len(keys))
    hist = histogram_from_keys(keys, H)
    pred = Predicate(tuple(atoms))
    bm = convert_predicate(pred, hist)
    arr = np.asarray(keys)
    for k in arr[key_mask(arr, atoms)].tolist():
        assert bm.has(hist.bucket_of(k))
