"""Analytical cost estimates for a Hippo index over uniformly distributed keys.

All functions are pure. Quantities are in tuples or I/O operations.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass


@dataclass(frozen=True)
class CostParams:
    H: int
    D: float
    SF: float
    card: int
    page_card: int

    def __post_init__(self):
        if self.H < 1 or self.card < 1 or self.page_card < 1:
            raise ValueError("H, card and page_card must be >= 1")
        if not 0 < self.SF <= 1:
            raise ValueError(f"SF must be in (0, 1], got {self.SF}")
        if not 0 < self.D <= 1:
            raise ValueError(f"D must be in (0, 1], got {self.D}")


@dataclass(frozen=True)
class CostEstimate:
    prob_selected: float
    est_query_tuples: float
    T: float
    P: float | None  # None when D < page_card / H
    num_entries: float
    init_cost: float
    insert_cost: float

    def to_dict(self) -> dict:
        return asdict(self)


def hit_buckets(SF: float, H: int) -> int:
    """Buckets a predicate of selectivity SF hits; never fewer than one."""
    return max(1, math.ceil(SF * H))


def prob_selected(SF: float, H: int, D: float) -> float:
    """Chance that an entry's partial histogram shares a bucket with the predicate."""
    return min(1.0, hit_buckets(SF, H) * D)


def est_query_tuples(SF: float, H: int, D: float, card: int) -> float:
    return prob_selected(SF, H, D) * card


def distinct_buckets(H: int, D: float) -> int:
    """round(D*H), ties rounding up."""
    return math.floor(D * H + 0.5)


def coupon_draws(H: int, k: int) -> float:
    """Expected uniform draws from H buckets until k distinct ones are seen."""
    if not 1 <= k <= H:
        raise ValueError(f"need 1 <= k <= H, got k={k}, H={H}")
    return H * math.fsum(1.0 / (H - i) for i in range(k))


def est_tuples_per_entry(H: int, D: float) -> float:
    return coupon_draws(H, distinct_buckets(H, D))


def est_pages_per_entry(H: int, D: float, page_card: int) -> float:
    if page_card < 1:
        raise ValueError("page_card must be >= 1")
    if D < page_card / H:
        raise ValueError(f"D={D} below page_card/H={page_card / H}")
    return est_tuples_per_entry(H, D) / page_card


def est_num_entries(card: int, H: int, D: float) -> float:
    return card / est_tuples_per_entry(H, D)


def est_init_cost(card: int, H: int, D: float) -> float:
    return card + est_num_entries(card, H, D)


def est_insert_cost(num_entries: float) -> float:
    if num_entries < 1:
        raise ValueError("num_entries must be >= 1")
    return math.log2(num_entries) + 4


def estimate(p: CostParams) -> CostEstimate:
    T = est_tuples_per_entry(p.H, p.D)
    entries = p.card / T
    return CostEstimate(
        prob_selected=prob_selected(p.SF, p.H, p.D),
        est_query_tuples=est_query_tuples(p.SF, p.H, p.D, p.card),
        T=T,
        P=T / p.page_card if p.D >= p.page_card / p.H else None,
        num_entries=entries,
        init_cost=p.card + entries,
        insert_cost=est_insert_cost(max(entries, 1.0)),
    )
