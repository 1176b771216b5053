from __future__ import annotations

import asyncio

import httpx
import pytest

from hippo.service import create_app


class AppClient:
    """Synchronous in-process client over the ASGI app."""

    def __init__(self):
        self.app = create_app()

    def request(self, method, path, **kw) -> httpx.Response:
        async def go():
            transport = httpx.ASGITransport(app=self.app)
            async with httpx.AsyncClient(transport=transport, base_url="http://t") as c:
                return await c.request(method, path, **kw)

        return asyncio.run(go())

    def get(self, path, **kw):
        return self.request("GET", path, **kw)

    def post(self, path, **kw):
        return self.request("POST", path, **kw)


@pytest.fixture
def client():
    c = AppClient()
    yield c
    c.app.state.registry.close_all()


@pytest.fixture
def built(client, tmp_path):
    tbl, idx = str(tmp_path / "t.tbl"), str(tmp_path / "t.idx")
    r = client.post("/tables", json={"table": tbl, "n": 5000, "pagecard": 20, "seed": 1,
                                     "key_max": 10_000})
    assert r.status_code == 200
    r = client.post("/indexes", json={"table": tbl, "index": idx, "resolution": 100,
                                      "density": 0.2})
    assert r.status_code == 200
    return tbl, idx, r.json()


def test_health(client):
    assert client.get("/health").json() == {"status": "ok"}


def test_gen_and_build(built):
    _, idx, info = built
    assert info["num_pages"] == 250 and info["H"] == 100 and info["D"] == 0.2
    assert info["num_entries"] > 1 and info["index"] == idx


def test_describe(client, built):
    _, idx, info = built
    assert client.get("/indexes", params={"index": idx}).json() == info


def test_query(client, built):
    _, idx, _ = built
    r = client.post("/query", json={"index": idx, "pred": "key >= 100 AND key < 200",
                                    "dump": True, "limit": 3}).json()
    assert r["count"] > 3 and len(r["tuples"]) == 3
    assert all(100 <= t["key"] < 200 for t in r["tuples"])
    assert client.post("/query", json={"index": idx, "pred": "key > 5"}).json()["tuples"] is None


def test_insert_delete_vacuum(client, built):
    _, idx, _ = built
    r = client.post("/insert", json={"index": idx, "keys": [123456, 123456], "payload_hex": "ab"})
    body = r.json()
    assert body["inserted"][0]["action"] in ("extended", "new_entry")
    assert body["inserted"][1]["action"] == "noop"
    assert body["inserted"][0]["page"] == 250
    assert all(x["probes"] <= body["max_probes"] for x in body["inserted"])
    q = client.post("/query", json={"index": idx, "pred": "key = 123456"}).json()
    assert q["count"] == 2
    d = client.post("/delete", json={"index": idx, "pred": "key = 123456"}).json()
    assert d == {"deleted": 2}
    assert client.post("/query", json={"index": idx, "pred": "key = 123456"}).json()["count"] == 0
    v = client.post("/vacuum", json={"index": idx}).json()
    assert len(v["resummarized"]) == 1
    assert client.post("/vacuum", json={"index": idx}).json()["resummarized"] == []


def test_estimate(client):
    r = client.post("/estimate", json={"resolution": 400, "density": 0.2, "sf": 0.001}).json()
    assert r["prob_selected"] == pytest.approx(0.2)
    r = client.post("/estimate", json={"resolution": 400, "density": 0.1, "sf": 0.001}).json()
    assert r["P"] is None


def test_bench(client, built):
    tbl, _, _ = built
    r = client.post("/bench", json={"table": tbl, "resolution": 100, "sfs": [0.01],
                                    "queries": 20})
    assert r.status_code == 200
    assert r.json()["measurement_only"]["exactness"] == "pass"


def test_errors(client, built, tmp_path):
    _, idx, _ = built
    assert client.post("/query", json={"index": idx, "pred": "key ~ 3"}).status_code == 400
    assert client.post("/query", json={"index": str(tmp_path / "no.idx"),
                                       "pred": "key = 3"}).status_code == 404
    assert client.post("/indexes", json={"table": str(tmp_path / "none.tbl"),
                                         "index": idx}).status_code == 404
    assert client.post("/estimate", json={"sf": 2}).status_code == 422
    assert client.post("/insert", json={"index": idx, "keys": []}).status_code == 422
    assert client.post("/estimate", json={"resolution": 400, "density": 0.2,
                                          "sf": 0.1, "pagecard": 1000}).status_code == 200


def test_correctness_failure_maps_to_409(client, built, monkeypatch):
    import hippo.bench as bench

    tbl, _, _ = built
    monkeypatch.setattr(bench, "_same", lambda a, b: False)
    r = client.post("/bench", json={"table": tbl, "sfs": [0.01], "queries": 2})
    assert r.status_code == 409


def test_rebuild_replaces_cached_index(client, built):
    tbl, idx, info = built
    r = client.post("/indexes", json={"table": tbl, "index": idx, "resolution": 50,
                                      "density": 0.5}).json()
    assert r["H"] == 50
    assert client.get("/indexes", params={"index": idx}).json()["H"] == 50
