"""Request and response models for the HTTP service."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field

from hippo.index import DEFAULT_DENSITY, DEFAULT_RESOLUTION


class GenRequest(BaseModel):
    table: str
    n: int = Field(gt=0)
    dist: Literal["uniform", "zipf"] = "uniform"
    zipf_s: float = Field(1.1, gt=1)
    pagecard: int = Field(50, ge=1)
    seed: int = 0
    key_min: int = 0
    key_max: int = 1_000_000
    payload_bytes: int = Field(0, ge=0)


class TableInfo(BaseModel):
    table: str
    num_pages: int
    page_card: int
    card: int


class BuildRequest(BaseModel):
    table: str
    index: str
    resolution: int = Field(DEFAULT_RESOLUTION, ge=1)
    density: float = Field(DEFAULT_DENSITY, gt=0, le=1)


class IndexInfo(BaseModel):
    index: str
    table: str
    H: int
    D: float
    num_entries: int
    num_pages: int
    index_bytes: int


class QueryRequest(BaseModel):
    index: str
    pred: str
    dump: bool = False
    limit: Optional[int] = Field(None, ge=0)


class TupleOut(BaseModel):
    page: int
    slot: int
    key: int


class QueryResponse(BaseModel):
    count: int
    pages_inspected: int
    entries_selected: int
    tuples: Optional[list[TupleOut]] = None


class InsertRequest(BaseModel):
    index: str
    keys: list[int] = Field(min_length=1)
    payload_hex: str = ""


class InsertOut(BaseModel):
    page: int
    slot: int
    bucket: int
    probes: int
    action: str


class InsertResponse(BaseModel):
    inserted: list[InsertOut]
    num_entries: int
    max_probes: int


class DeleteRequest(BaseModel):
    index: str
    pred: str


class DeleteResponse(BaseModel):
    deleted: int


class VacuumRequest(BaseModel):
    index: str


class VacuumResponse(BaseModel):
    resummarized: list[tuple[int, int]]
    num_entries: int
    index_bytes: int


class EstimateRequest(BaseModel):
    resolution: int = Field(DEFAULT_RESOLUTION, ge=1)
    density: float = Field(DEFAULT_DENSITY, gt=0, le=1)
    sf: float = Field(gt=0, le=1)
    card: int = Field(1_000_000, ge=1)
    pagecard: int = Field(50, ge=1)


class CostEstimateOut(BaseModel):
    prob_selected: float
    est_query_tuples: float
    T: float
    P: Optional[float]
    num_entries: float
    init_cost: float
    insert_cost: float


class BenchRequest(BaseModel):
    table: str
    resolution: int = Field(DEFAULT_RESOLUTION, ge=1)
    density: float = Field(DEFAULT_DENSITY, gt=0, le=1)
    sfs: list[float] = Field(default_factory=lambda: [1e-5, 1e-4, 1e-3, 1e-2], min_length=1)
    queries: int = Field(200, ge=1)
    seed: int = 0


class BenchReportOut(BaseModel):
    config: dict
    measured: dict
    predicted: dict
    relative_error: dict
    measurement_only: dict
