"""
Command-line client for the hippo service.

Every subcommand turns its flags into a request for the HTTP API.  With
--url (or HIPPO_URL) the request goes to a running server; otherwise the
service app is run in-process for the duration of the command.

Exit codes: 0 success, 2 correctness failure, 1 any other error.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import os
import sys
from typing import Any

import httpx
import numpy as np


class ClientError(Exception):
    def __init__(self, status: int, detail: Any):
        super().__init__(f"HTTP {status}: {detail}")
        self.status = status
        self.detail = detail


class Client:
    def __init__(self, url: str | None = None):
        self._app = None
        if url:
            self._http = httpx.Client(base_url=url, timeout=None)
        else:
            from hippo.service import create_app

            self._app = create_app()

    def _request(self, method: str, path: str, body: dict | None, params: dict | None):
        if self._app is None:
            return self._http.request(method, path, json=body, params=params)

        async def go():
            transport = httpx.ASGITransport(app=self._app)
            async with httpx.AsyncClient(transport=transport, base_url="http://hippo") as c:
                return await c.request(method, path, json=body, params=params)

        return asyncio.run(go())

    def call(self, method: str, path: str, body: dict | None = None, params: dict | None = None) -> dict:
        r = self._request(method, path, body, params)
        if r.status_code >= 400:
            try:
                detail = r.json().get("detail", r.text)
            except ValueError:
                detail = r.text
            raise ClientError(r.status_code, detail)
        return r.json()

    def close(self) -> None:
        if self._app is None:
            self._http.close()
        else:
            self._app.state.registry.close_all()


def _need(args, *names: str) -> None:
    missing = [f"--{n}" for n in names if getattr(args, n) is None]
    if missing:
        raise SystemExit(f"hippo {args.cmd}: missing {' '.join(missing)}")


def _print(args, result: dict) -> None:
    if args.json:
        print(json.dumps(result, indent=2))
        return
    for k, v in result.items():
        if k == "tuples" and v is not None:
            for t in v:
                print(f"  ({t['page']},{t['slot']}) key={t['key']}")
        elif isinstance(v, (dict, list)):
            print(f"{k}: {json.dumps(v)}")
        else:
            print(f"{k}: {v}")


def _run(args, client: Client) -> dict:
    cmd = args.cmd
    if cmd == "gen":
        _need(args, "table", "n")
        return client.call("POST", "/tables", {
            "table": args.table, "n": args.n, "dist": args.dist, "zipf_s": args.zipf_s,
            "pagecard": args.pagecard, "seed": args.seed, "key_min": args.key_min,
            "key_max": args.key_max, "payload_bytes": args.payload_bytes,
        })
    if cmd == "build":
        _need(args, "table", "index")
        return client.call("POST", "/indexes", {
            "table": args.table, "index": args.index,
            "resolution": args.resolution, "density": args.density,
        })
    if cmd == "query":
        _need(args, "index", "pred")
        return client.call("POST", "/query", {
            "index": args.index, "pred": args.pred, "dump": args.dump, "limit": args.limit,
        })
    if cmd == "insert":
        _need(args, "index")
        keys = list(args.key or [])
        if args.count:
            rng = np.random.default_rng(args.seed)
            keys += rng.integers(args.key_min, args.key_max, size=args.count).tolist()
        if not keys:
            raise SystemExit("hippo insert: give --key or --count")
        return client.call("POST", "/insert", {
            "index": args.index, "keys": keys, "payload_hex": args.payload_hex,
        })
    if cmd == "delete":
        _need(args, "index", "pred")
        return client.call("POST", "/delete", {"index": args.index, "pred": args.pred})
    if cmd == "vacuum":
        _need(args, "index")
        return client.call("POST", "/vacuum", {"index": args.index})
    if cmd == "estimate":
        _need(args, "sf")
        return client.call("POST", "/estimate", {
            "resolution": args.resolution, "density": args.density, "sf": args.sf,
            "card": args.card, "pagecard": args.pagecard,
        })
    if cmd == "bench":
        _need(args, "table")
        return client.call("POST", "/bench", {
            "table": args.table, "resolution": args.resolution, "density": args.density,
            "sfs": args.sfs, "queries": args.queries, "seed": args.seed,
        })
    raise SystemExit(f"unknown command {cmd}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--table")
    common.add_argument("--index")
    common.add_argument("--resolution", "-H", type=int, default=400)
    common.add_argument("--density", "-D", type=float, default=0.2)
    common.add_argument("--pagecard", type=int, default=50)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--pred")
    common.add_argument("--json", action="store_true", help="machine-readable output")
    common.add_argument("--url", default=os.environ.get("HIPPO_URL"),
                        help="service base URL (default: run in-process)")

    p = argparse.ArgumentParser(prog="hippo", description=__doc__.split("\n\n")[0].strip())
    sub = p.add_subparsers(dest="cmd", required=True)

    g = sub.add_parser("gen", parents=[common], help="generate a synthetic table")
    g.add_argument("--n", type=int)
    g.add_argument("--dist", choices=["uniform", "zipf"], default="uniform")
    g.add_argument("--zipf-s", type=float, default=1.1)
    g.add_argument("--key-min", type=int, default=0)
    g.add_argument("--key-max", type=int, default=1_000_000)
    g.add_argument("--payload-bytes", type=int, default=0)

    sub.add_parser("build", parents=[common], help="build a Hippo index over a table")

    q = sub.add_parser("query", parents=[common], help="run a predicate through the index")
    q.add_argument("--dump", action="store_true", help="list matching tuples")
    q.add_argument("--limit", type=int)

    i = sub.add_parser("insert", parents=[common], help="insert tuples, updating the index")
    i.add_argument("--key", type=int, action="append")
    i.add_argument("--count", type=int, default=0, help="also insert this many random keys")
    i.add_argument("--key-min", type=int, default=0)
    i.add_argument("--key-max", type=int, default=1_000_000)
    i.add_argument("--payload-hex", default="")

    sub.add_parser("delete", parents=[common], help="delete tuples matching --pred")
    sub.add_parser("vacuum", parents=[common], help="re-summarize entries after deletes")

    e = sub.add_parser("estimate", parents=[common], help="cost-model estimates")
    e.add_argument("--sf", type=float)
    e.add_argument("--card", type=int, default=1_000_000)

    b = sub.add_parser("bench", parents=[common], help="measure and compare with the cost model")
    b.add_argument("--sfs", type=float, nargs="+", default=[1e-5, 1e-4, 1e-3, 1e-2])
    b.add_argument("--queries", type=int, default=200)

    s = sub.add_parser("serve", help="run the HTTP service")
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--port", type=int, default=8000)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.cmd == "serve":
        import uvicorn

        uvicorn.run("hippo.service:app", host=args.host, port=args.port)
        return 0
    client = Client(args.url)
    try:
        result = _run(args, client)
    except ClientError as e:
        print(f"hippo {args.cmd}: {e.detail}", file=sys.stderr)
        return 2 if e.status == 409 else 1
    except Exception as e:  # connection failures and the like
        print(f"hippo {args.cmd}: {e}", file=sys.stderr)
        return 1
    finally:
        client.close()
    _print(args, result)
    return 0


if __name__ == "__main__":
    sys.exit(main())
