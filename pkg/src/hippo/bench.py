"""Synthetic tables and benchmark runs comparing measurements with the cost model."""

from __future__ import annotations

import math
import tempfile
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from hippo import costmodel
from hippo.baseline import FullScan, build_dense
from hippo.errors import CorrectnessError
from hippo.index import HippoIndex, max_probes
from hippo.pagestore import TableFile
from hippo.predicate import Predicate, Range

DEFAULT_KEY_MAX = 1_000_000


def generate_keys(n: int, dist: str = "uniform", seed: int = 0, key_min: int = 0,
                  key_max: int = DEFAULT_KEY_MAX, zipf_s: float = 1.1) -> np.ndarray:
    """n keys in [key_min, key_max).

    zipf draws ranks from a Zipf law truncated to the domain size (out-of-range
    draws are redrawn) and maps rank r to key_min + r - 1.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if key_max <= key_min:
        raise ValueError("empty key domain")
    rng = np.random.default_rng(seed)
    if dist == "uniform":
        return rng.integers(key_min, key_max, size=n, dtype=np.int64)
    if dist == "zipf":
        if zipf_s <= 1:
            raise ValueError("zipf exponent must be > 1")
        span = key_max - key_min
        ranks = rng.zipf(zipf_s, size=n)
        bad = np.flatnonzero(ranks > span)
        while bad.size:
            ranks[bad] = rng.zipf(zipf_s, size=bad.size)
            bad = bad[ranks[bad] > span]
        return key_min + ranks.astype(np.int64) - 1
    raise ValueError(f"unknown distribution {dist!r}")


def gen_table(path: str | Path, n: int, dist: str = "uniform", page_card: int = 50,
              seed: int = 0, key_min: int = 0, key_max: int = DEFAULT_KEY_MAX,
              zipf_s: float = 1.1, payload_bytes: int = 0) -> TableFile:
    keys = generate_keys(n, dist, seed, key_min, key_max, zipf_s)
    payloads = None
    if payload_bytes:
        blob = np.random.default_rng(seed + 1).bytes(n * payload_bytes)
        payloads = [blob[i * payload_bytes : (i + 1) * payload_bytes] for i in range(n)]
    table = TableFile.create(path, page_card)
    table.append_many(keys.tolist(), payloads)
    return table


def random_range(rng: np.random.Generator, key_min: int, key_max: int, sf: float) -> Predicate:
    """Closed integer range covering about sf of the key domain at a random offset."""
    width = sf * (key_max - key_min)
    lo = rng.uniform(key_min, key_max - width)
    lo_i, hi_i = math.ceil(lo), math.floor(lo + width)
    if hi_i < lo_i:
        hi_i = lo_i
    return Predicate.of(Range(lo_i, hi_i))


def tuples_per_entry(index: HippoIndex) -> np.ndarray:
    """Live tuples summarized by each entry, in page order."""
    _, pages, _ = index.table.page_columns()
    per_page = np.bincount(pages, minlength=index.table.num_pages)
    edges = np.cumsum(np.concatenate(([0], per_page)))
    return np.array([edges[e.end_page + 1] - edges[e.start_page] for e in index.entries])


def mean_tuples_per_entry(index: HippoIndex) -> float:
    """Mean over closed entries; the final, possibly unfilled, entry is left out."""
    counts = tuples_per_entry(index)
    if counts.size > 1:
        counts = counts[:-1]
    return float(counts.mean())


def _same(a: tuple[np.ndarray, np.ndarray], b: tuple[np.ndarray, np.ndarray]) -> bool:
    """Equal as sets of (page, slot) pairs."""
    oa, ob = np.lexsort(a[::-1]), np.lexsort(b[::-1])
    return (np.array_equal(a[0][oa], b[0][ob]) and np.array_equal(a[1][oa], b[1][ob]))


def estimated_index_bytes(num_entries: float, H: int) -> float:
    """Entry records at the raw-bitmap size plus a sorted-list slot each."""
    return num_entries * (18 + 1 + math.ceil(H / 8) + 8)


def _rel(measured: float, predicted: float) -> float | None:
    if predicted == 0:
        return None
    return (measured - predicted) / predicted


@dataclass
class BenchReport:
    config: dict
    measured: dict = field(default_factory=dict)
    predicted: dict = field(default_factory=dict)
    relative_error: dict = field(default_factory=dict)
    measurement_only: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def run_bench(table: TableFile, H: int = 400, D: float = 0.2,
              sfs: Sequence[float] = (1e-5, 1e-4, 1e-3, 1e-2), queries: int = 200,
              seed: int = 0, workdir: str | Path | None = None,
              probe_samples: int = 1000, dist: str | None = None) -> BenchReport:
    """Build Hippo and the dense baseline on table, run random range queries, compare.

    Raises CorrectnessError before reporting anything if a query answer differs
    from the full scan.
    """
    rng = np.random.default_rng(seed)
    with tempfile.TemporaryDirectory() as tmp:
        out = Path(workdir) if workdir else Path(tmp)
        t0 = time.perf_counter()
        index = HippoIndex.build(table, out / "bench.hippo", H, D)
        build_s = time.perf_counter() - t0
        dense = build_dense(table)
        dense_bytes = dense.save(out / "bench.dense")
        oracle = FullScan(table)
        card = int(oracle.keys.size)
        key_min, key_max = int(oracle.keys.min()), int(oracle.keys.max())

        fractions, times, mismatches = {}, {}, 0
        for sf in sfs:
            fr, t = [], 0.0
            for _ in range(queries):
                pred = random_range(rng, key_min, key_max, sf)
                t0 = time.perf_counter()
                res = index.search(pred)
                t += time.perf_counter() - t0
                want = oracle.query(pred)
                if not (_same(want, (res.pages, res.slots)) and _same(want, dense.query(pred))):
                    mismatches += 1
                fr.append(res.pages_inspected / table.num_pages)
            fractions[str(sf)] = float(np.mean(fr))
            times[str(sf)] = t / max(queries, 1)
        if mismatches:
            index.close()
            raise CorrectnessError(f"{mismatches} queries disagreed with the full scan")

        probes = [index.locate_entry(int(p))[1]
                  for p in rng.integers(0, table.num_pages, size=probe_samples)]
        n_entries = index.num_entries
        mean_tpe = mean_tuples_per_entry(index)
        index_bytes = index.nbytes
        index.close()

    pc = table.page_card
    T = costmodel.est_tuples_per_entry(H, D)
    predicted = {
        "mean_tuples_per_entry": T,
        "num_entries": card / T,
        "pages_selected_fraction": {str(sf): costmodel.prob_selected(sf, H, D) for sf in sfs},
        "entry_lookup_probes_max": max_probes(n_entries),
        "insert_cost": costmodel.est_insert_cost(n_entries),
        "init_cost": costmodel.est_init_cost(card, H, D),
        "index_bytes": estimated_index_bytes(card / T, H),
    }
    if D >= pc / H:
        predicted["pages_per_entry"] = costmodel.est_pages_per_entry(H, D, pc)
    measured = {
        "index_bytes": index_bytes,
        "num_entries": n_entries,
        "mean_tuples_per_entry": mean_tpe,
        "pages_selected_fraction": fractions,
        "entry_lookup_probes_max": int(max(probes)),
    }
    rel = {
        "mean_tuples_per_entry": _rel(mean_tpe, T),
        "num_entries": _rel(n_entries, card / T),
        "index_bytes": _rel(index_bytes, predicted["index_bytes"]),
        "entry_lookup_probes_max": _rel(max(probes), predicted["entry_lookup_probes_max"]),
        "pages_selected_fraction": {
            k: _rel(v, predicted["pages_selected_fraction"][k]) for k, v in fractions.items()
        },
    }
    return BenchReport(
        config={"card": card, "page_card": pc, "H": H, "D": D, "seed": seed,
                "distribution": dist or "unspecified",
                "sfs": list(sfs), "queries_per_sf": queries, "num_pages": table.num_pages},
        measured=measured,
        predicted=predicted,
        relative_error=rel,
        measurement_only={
            "exactness": "pass",
            "dense_index_bytes": dense_bytes,
            "size_ratio_dense_over_hippo": dense_bytes / index_bytes,
            "entry_lookup_probes_mean": float(np.mean(probes)),
            "build_seconds": build_s,
            "mean_query_seconds": times,
        },
    )
