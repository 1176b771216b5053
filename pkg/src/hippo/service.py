"""
HTTP service over table files and Hippo indexes.

Open indexes are cached per path.  Each one is guarded by a readers-writer
lock: queries share it, inserts/deletes/vacuum/rebuild take it exclusively.
Run with ``hippo serve`` or ``uvicorn hippo.service:app``.
"""

from __future__ import annotations

import logging
import threading
from contextlib import asynccontextmanager, contextmanager
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from hippo import costmodel
from hippo.bench import gen_table, run_bench
from hippo.errors import CorrectnessError, HippoError
from hippo.index import HippoIndex, max_probes
from hippo.pagestore import TableFile
from hippo.predicate import parse_predicate
from hippo.schemas import (
    BenchReportOut, BenchRequest, BuildRequest, CostEstimateOut, DeleteRequest,
    DeleteResponse, EstimateRequest, GenRequest, IndexInfo, InsertOut, InsertRequest,
    InsertResponse, QueryRequest, QueryResponse, TableInfo, TupleOut, VacuumRequest,
    VacuumResponse,
)

log = logging.getLogger(__name__)


class RWLock:
    """Many readers or one writer."""

    def __init__(self):
        self._cond = threading.Condition()
        self._readers = 0
        self._writer = False

    @contextmanager
    def read(self):
        with self._cond:
            while self._writer:
                self._cond.wait()
            self._readers += 1
        try:
            yield
        finally:
            with self._cond:
                self._readers -= 1
                self._cond.notify_all()

    @contextmanager
    def write(self):
        with self._cond:
            while self._writer or self._readers:
                self._cond.wait()
            self._writer = True
        try:
            yield
        finally:
            with self._cond:
                self._writer = False
                self._cond.notify_all()


class Registry:
    def __init__(self):
        self._lock = threading.Lock()
        self._open: dict[Path, tuple[HippoIndex, RWLock]] = {}

    def get(self, path: str) -> tuple[HippoIndex, RWLock]:
        key = Path(path).resolve()
        with self._lock:
            if key not in self._open:
                if not key.exists():
                    raise FileNotFoundError(f"no index at {path}")
                self._open[key] = (HippoIndex.open(key), RWLock())
            return self._open[key]

    def drop(self, path: str) -> None:
        """Forget cached indexes stored at path or built on the table at path."""
        target = Path(path).resolve()
        with self._lock:
            for key, (idx, lock) in list(self._open.items()):
                if key == target or Path(idx.table.path).resolve() == target:
                    with lock.write():
                        idx.close()
                    del self._open[key]

    def close_all(self) -> None:
        with self._lock:
            for idx, _ in self._open.values():
                idx.close()
            self._open.clear()


def _info(idx: HippoIndex) -> IndexInfo:
    return IndexInfo(index=str(idx.path), table=str(idx.table.path), H=idx.H, D=idx.D,
                     num_entries=idx.num_entries, num_pages=idx.table.num_pages,
                     index_bytes=idx.nbytes)


def create_app() -> FastAPI:
    registry = Registry()

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        yield
        registry.close_all()

    app = FastAPI(title="hippo", version="0.1.0", lifespan=lifespan)
    app.state.registry = registry

    @app.exception_handler(CorrectnessError)
    async def _correctness(request: Request, exc: CorrectnessError):
        return JSONResponse(status_code=409, content={"detail": str(exc)})

    @app.exception_handler(FileNotFoundError)
    async def _missing(request: Request, exc: FileNotFoundError):
        return JSONResponse(status_code=404, content={"detail": str(exc)})

    @app.exception_handler(HippoError)
    async def _hippo(request: Request, exc: HippoError):
        return JSONResponse(status_code=400, content={"detail": f"{type(exc).__name__}: {exc}"})

    @app.exception_handler(ValueError)
    async def _value(request: Request, exc: ValueError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.post("/tables", response_model=TableInfo)
    def gen(req: GenRequest):
        registry.drop(req.table)
        with gen_table(req.table, req.n, req.dist, req.pagecard, req.seed, req.key_min,
                       req.key_max, req.zipf_s, req.payload_bytes) as t:
            return TableInfo(table=req.table, num_pages=t.num_pages, page_card=t.page_card,
                             card=req.n)

    @app.post("/indexes", response_model=IndexInfo)
    def build(req: BuildRequest):
        if not Path(req.table).exists():
            raise FileNotFoundError(f"no table at {req.table}")
        registry.drop(req.index)
        with TableFile.open(req.table) as t:
            HippoIndex.build(t, req.index, req.resolution, req.density).close()
        idx, lock = registry.get(req.index)
        with lock.read():
            return _info(idx)

    @app.get("/indexes", response_model=IndexInfo)
    def describe(index: str):
        idx, lock = registry.get(index)
        with lock.read():
            return _info(idx)

    @app.post("/query", response_model=QueryResponse)
    def query(req: QueryRequest):
        pred = parse_predicate(req.pred)
        idx, lock = registry.get(req.index)
        with lock.read():
            res = idx.search(pred)
        tuples = None
        if req.dump:
            n = len(res) if req.limit is None else min(req.limit, len(res))
            tuples = [TupleOut(page=p, slot=s, key=k) for p, s, k in
                      zip(res.pages[:n].tolist(), res.slots[:n].tolist(), res.keys[:n].tolist())]
        return QueryResponse(count=len(res), pages_inspected=res.pages_inspected,
                             entries_selected=res.entries_selected, tuples=tuples)

    @app.post("/insert", response_model=InsertResponse)
    def insert(req: InsertRequest):
        payload = bytes.fromhex(req.payload_hex)
        idx, lock = registry.get(req.index)
        out = []
        with lock.write():
            for k in req.keys:
                r = idx.insert(k, payload)
                out.append(InsertOut(page=r.tid.page, slot=r.tid.slot, bucket=r.bucket,
                                     probes=r.probes, action=r.action))
            n = idx.num_entries
        return InsertResponse(inserted=out, num_entries=n, max_probes=max_probes(n))

    @app.post("/delete", response_model=DeleteResponse)
    def delete(req: DeleteRequest):
        pred = parse_predicate(req.pred)
        idx, lock = registry.get(req.index)
        with lock.write():
            res = idx.search(pred)
            for tid in sorted(res.tids()):
                idx.table.delete_tuple(tid)
        return DeleteResponse(deleted=len(res))

    @app.post("/vacuum", response_model=VacuumResponse)
    def vacuum(req: VacuumRequest):
        idx, lock = registry.get(req.index)
        with lock.write():
            done = idx.vacuum()
            return VacuumResponse(resummarized=done, num_entries=idx.num_entries,
                                  index_bytes=idx.nbytes)

    @app.post("/estimate", response_model=CostEstimateOut)
    def estimate(req: EstimateRequest):
        est = costmodel.estimate(costmodel.CostParams(req.resolution, req.density, req.sf,
                                                      req.card, req.pagecard))
        return CostEstimateOut(**est.to_dict())

    @app.post("/bench", response_model=BenchReportOut)
    def bench(req: BenchRequest):
        if not Path(req.table).exists():
            raise FileNotFoundError(f"no table at {req.table}")
        with TableFile.open(req.table) as t:
            report = run_bench(t, req.resolution, req.density, req.sfs, req.queries, req.seed)
        return BenchReportOut(**report.to_dict())

    return app


app = create_app()
