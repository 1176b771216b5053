from __future__ import annotations

import numpy as np
import pytest

from hippo.costmodel import (
    CostParams,
    coupon_draws,
    est_init_cost,
    est_insert_cost,
    est_num_entries,
    est_pages_per_entry,
    est_query_tuples,
    est_tuples_per_entry,
    estimate,
    prob_selected,
)


def test_prob_selected_examples():
    assert prob_selected(0.2, 10, 0.2) == pytest.approx(0.4)
    assert [prob_selected(sf, 400, 0.2) for sf in (1e-5, 1e-4, 1e-3, 1e-2)] == pytest.approx(
        [0.2, 0.2, 0.2, 0.8])
    assert prob_selected(1.0, 10, 0.2) == 1.0


def test_query_tuples():
    assert est_query_tuples(0.2, 10, 0.2, 10**6) == pytest.approx(4e5)
    assert est_query_tuples(0.01, 400, 0.2, 10**6) == pytest.approx(8e5)
    assert est_query_tuples(1.0, 10, 0.5, 777) == 777


def test_tuples_per_entry():
    assert est_tuples_per_entry(1000, 0.1) == pytest.approx(105.3, abs=0.05)
    assert est_tuples_per_entry(10000, 0.2) == pytest.approx(2230, rel=1e-3)
    assert est_tuples_per_entry(400, 1 / 400) == 1.0
    with pytest.raises(ValueError):
        coupon_draws(10, 0)
    with pytest.raises(ValueError):
        coupon_draws(10, 11)


def test_pages_per_entry():
    assert est_pages_per_entry(1000, 0.1, 50) == pytest.approx(2.106, abs=1e-3)
    assert est_pages_per_entry(10000, 0.2, 50) == pytest.approx(44.6, abs=0.05)
    assert est_pages_per_entry(1000, 0.1, 1) == est_tuples_per_entry(1000, 0.1)
    with pytest.raises(ValueError):
        est_pages_per_entry(100, 0.1, 50)


def test_entries_and_costs():
    n = est_num_entries(10**6, 1000, 0.1)
    assert n == pytest.approx(9497, abs=1)
    assert est_init_cost(10**6, 1000, 0.1) == pytest.approx(1_009_497, abs=1)
    assert est_insert_cost(n) == pytest.approx(17.2, abs=0.05)
    assert est_insert_cost(1) == 4
    assert est_init_cost(1, 1, 1.0) == 2
    # lowest allowed D gives the most entries, bounded by 2*Card overall
    assert est_num_entries(10**6, 1000, 0.05) > n
    assert est_init_cost(10**6, 1000, 0.001) <= 2 * 10**6
    with pytest.raises(ValueError):
        est_insert_cost(0.5)


def test_monotonicity():
    for H in (10, 100, 400):
        for D in (0.1, 0.2, 0.5):
            ps = [prob_selected(sf, H, D) for sf in np.linspace(1e-4, 1, 40)]
            assert all(a <= b for a, b in zip(ps, ps[1:]))
    assert all(prob_selected(0.01, H, 0.2) <= prob_selected(0.01, H + 50, 0.2)
               for H in range(50, 1000, 50))
    assert all(prob_selected(0.01, 400, D) <= prob_selected(0.01, 400, D + 0.05)
               for D in np.arange(0.05, 0.9, 0.05))
    entries_by_d = [est_num_entries(10**6, 1000, d) for d in (0.05, 0.1, 0.2, 0.4, 0.8)]
    assert all(a > b for a, b in zip(entries_by_d, entries_by_d[1:]))
    entries_by_h = [est_num_entries(10**6, h, 0.2) for h in (400, 800, 1600, 3200)]
    assert all(a >= b for a, b in zip(entries_by_h, entries_by_h[1:]))
    ins = [est_insert_cost(n) for n in (1, 2, 10, 1000, 10**6)]
    assert ins == sorted(ins)


def _simulate(H, k, trials, rng):
    # vectorised coupon collector: draws needed for k distinct out of H
    total = 0
    for _ in range(trials // 1000):
        # the i-th new coupon needs Geometric((H - i) / H) draws
        p = (H - np.arange(k)) / H
        total += rng.geometric(p, size=(1000, k)).sum()
    return total / trials


@pytest.mark.parametrize("H,k", [(1000, 100), (10000, 2000)])
def test_monte_carlo(H, k):
    rng = np.random.default_rng(1)
    sim = _simulate(H, k, 100_000, rng)
    assert sim == pytest.approx(coupon_draws(H, k), rel=0.02)


def test_direct_simulation_small():
    rng = np.random.default_rng(2)
    H, k, trials = 50, 20, 20_000
    counts = []
    for _ in range(trials):
        seen, n = set(), 0
        while len(seen) < k:
            seen.add(int(rng.integers(H)))
            n += 1
        counts.append(n)
    assert np.mean(counts) == pytest.approx(coupon_draws(H, k), rel=0.02)


def test_estimate_record():
    e = estimate(CostParams(H=400, D=0.2, SF=0.001, card=10**6, page_card=50))
    d = e.to_dict()
    assert d["prob_selected"] == pytest.approx(0.2)
    assert d["P"] == pytest.approx(d["T"] / 50)
    assert estimate(CostParams(H=400, D=0.1, SF=0.001, card=10**6, page_card=50)).P is None
    assert estimate(CostParams(H=400, D=0.2, SF=0.001, card=10**6, page_card=50)) == e
    with pytest.raises(ValueError):
        CostParams(H=400, D=0.2, SF=0, card=10, page_card=5)
