"""Client-facing API of one validator, plus an optional HTTP listener.

Endpoints (all responses canonical JSON):

    POST /batches                 body: batch JSON
    GET  /batch_statuses?id=ID
    GET  /state/ADDRESS
    GET  /state?prefix=HEX        or ?category=NAME
    GET  /status
"""

from __future__ import annotations

import argparse
import logging
import os
import random
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Any
from urllib.parse import parse_qs, urlparse

from . import canonical
from .consensus.simulation import Network, NetworkConfig
from .ledger.chain import Batch, Role, StructureError
from .ledger.state import CATEGORIES, AddressError, check_address, check_prefix, namespace

log = logging.getLogger(__name__)

WRITE_LABELS = (
    "Register E Matrix",
    "Audit Verification and Register Result",
    "Register QI",
    "Register WM_minus",
    "Register WM_plus",
    "Register CW",
    "Rank Compute and Register Rank",
)
READ_LABELS = (
    "Read QI and Metrics",
    "Read ranks",
    "Read rank",
    "Read WM_plus",
    "Read WM_minus",
    "Read E matrix",
    "Read CW",
)


class NodeService:
    def __init__(self, network: Network, node_id: int = 0):
        self.network = network
        self.node_id = node_id
        self.lock = threading.RLock()

    @property
    def node(self):
        return self.network.nodes[self.node_id]

    def submit_batch(self, body: Any) -> tuple[int, dict[str, Any]]:
        try:
            batch = Batch.from_json(canonical.decode(body) if isinstance(body, (bytes, str)) else body)
        except (StructureError, ValueError, AttributeError) as exc:
            return 400, {"error": f"malformed batch: {exc}"}
        with self.lock:
            ok, reason = self.network.submit(self.node_id, batch)
        if not ok:
            return 400, {"batch_id": batch.id, "accepted": False, "error": reason}
        return 202, {"batch_id": batch.id, "accepted": True}

    def batch_status(self, batch_id: str) -> dict[str, Any]:
        with self.lock:
            st = self.node.status(batch_id)
        out: dict[str, Any] = {"id": batch_id, "status": st[0].upper()}
        if st[0] == "committed":
            out["height"] = st[1]
        elif st[0] == "invalid":
            out["reason"] = st[1]
        return out

    @staticmethod
    def _entries(pairs) -> list[dict[str, Any]]:
        return [{"address": a, "data": canonical.decode(p)} for a, p in pairs]

    def read_state(self, address: str) -> list[dict[str, Any]]:
        check_address(address)
        with self.lock:
            payload = self.node.state.get(address)
        return [] if payload is None else self._entries([(address, payload)])

    def read_prefix(self, prefix: str) -> list[dict[str, Any]]:
        if prefix in CATEGORIES:
            prefix = namespace(prefix)
        check_prefix(prefix)
        with self.lock:
            pairs = self.node.state.items(prefix)
        return self._entries(pairs)

    def handle(self, method: str, path: str, body: bytes | None = None) -> tuple[int, dict[str, Any]]:
        url = urlparse(path)
        query = {k: v[0] for k, v in parse_qs(url.query).items()}
        try:
            if method == "POST" and url.path == "/batches":
                return self.submit_batch(body or b"")
            if method == "GET" and url.path == "/batch_statuses":
                if "id" not in query:
                    return 400, {"error": "missing id"}
                return 200, {"data": [self.batch_status(query["id"])]}
            if method == "GET" and url.path == "/state":
                prefix = query.get("prefix", query.get("category", ""))
                return 200, {"data": self.read_prefix(prefix)}
            if method == "GET" and url.path.startswith("/state/"):
                return 200, {"data": self.read_state(url.path[len("/state/"):])}
            if method == "GET" and url.path == "/status":
                with self.lock:
                    node = self.node
                    return 200, {"node": self.node_id, "height": node.height, "view": node.view,
                                 "state_root": node.state.root}
        except AddressError as exc:
            return 400, {"error": str(exc)}
        return 404, {"error": f"no route for {method} {url.path}"}


def make_http_handler(service: NodeService):
    class Handler(BaseHTTPRequestHandler):
        def _reply(self, code: int, doc: dict[str, Any]):
            data = canonical.encode(doc)
            self.send_response(code)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def do_GET(self):
            self._reply(*service.handle("GET", self.path))

        def do_POST(self):
            length = int(self.headers.get("Content-Length") or 0)
            self._reply(*service.handle("POST", self.path, self.rfile.read(length)))

        def log_message(self, fmt, *args):
            log.debug("%s - " + fmt, self.address_string(), *args)

    return Handler


class RealtimeDriver(threading.Thread):
    """Advances the simulated network in step with the wall clock."""

    def __init__(self, service: NodeService, resolution: float = 0.005):
        super().__init__(daemon=True)
        self.service = service
        self.resolution = resolution
        self.stopped = threading.Event()

    def run(self):
        start = time.monotonic()
        offset = self.service.network.now
        while not self.stopped.is_set():
            with self.service.lock:
                self.service.network.run_until(offset + (time.monotonic() - start) * 1000.0)
            time.sleep(self.resolution)


def roles_from_key_dir(key_dir: Path) -> dict[str, str]:
    roles = {}
    for role in Role:
        pub = key_dir / f"{role.value}.pub"
        if pub.exists():
            roles[pub.read_text().strip()] = role.value
    return roles


def serve(service: NodeService, host: str, port: int) -> ThreadingHTTPServer:
    server = ThreadingHTTPServer((host, port), make_http_handler(service))
    driver = RealtimeDriver(service)
    driver.start()
    server.driver = driver  # type: ignore[attr-defined]
    return server


# ---- latency characterisation --------------------------------------------------


def latency_probe(
    client,
    documents: dict[str, dict[str, Any]],
    repetitions: int = 10,
    *,
    keys: dict[str, str] | None = None,
    purpose: str | None = None,
    seed: int = 0,
    client_rtt: tuple[float, float] = (1.0, 4.0),
) -> dict[str, Any]:
    """Time every write and read dataset ``repetitions`` times.

    ``client`` is a ``synthrank.client.Client`` over a simulated network;
    latencies are simulated milliseconds: for writes, submission to commit on
    the serving node, plus a sampled client round trip; for reads, the round
    trip alone since they are answered locally. ``documents`` maps each
    registration verb to its file document.
    """
    keys = keys or {"pm": "product_manager", "ds": "data_scientist", "auditor": "auditor"}
    rng = random.Random(seed)
    purposes = sorted(documents["cw"])
    purpose = purpose or purposes[0]

    def row(verb: str, i: int) -> dict[str, Any]:
        items = sorted(documents[verb].items())
        return dict([items[i % len(items)]])

    rows = {
        "Register E Matrix": ("method", keys["ds"], lambda i: row("method", i)),
        "Audit Verification and Register Result": ("audit", keys["auditor"], lambda i: client.audit_args(documents)),
        "Register QI": ("qi", keys["pm"], lambda i: row("qi", i)),
        "Register WM_minus": ("wmm", keys["pm"], lambda i: {purpose: documents["wmm"][purpose]}),
        "Register WM_plus": ("wmp", keys["pm"], lambda i: {purpose: documents["wmp"][purpose]}),
        "Register CW": ("cw", keys["pm"], lambda i: {purpose: documents["cw"][purpose]}),
        "Rank Compute and Register Rank": ("qos", keys["pm"], lambda i: {"purposes": [purpose]}),
    }
    writes: dict[str, list[float]] = {label: [] for label in WRITE_LABELS}
    reads: dict[str, list[float]] = {label: [] for label in READ_LABELS}
    failures: list[str] = []
    for _ in range(repetitions):
        for label in WRITE_LABELS:
            verb, key, build = rows[label]
            start = client.transport.now()
            result = client.submit(verb, build(len(writes[label])), key)
            if result.status != "COMMITTED":
                failures.append(f"{label}: {result.status} {result.reason}")
                continue
            writes[label].append(client.transport.now() - start + rng.uniform(*client_rtt))
    read_ops = {
        "Read QI and Metrics": lambda: client.read("qis"),
        "Read ranks": lambda: client.read("ranks"),
        "Read rank": lambda: client.read("rank", purpose),
        "Read WM_plus": lambda: client.read("wmps"),
        "Read WM_minus": lambda: client.read("wmms"),
        "Read E matrix": lambda: client.read("methods"),
        "Read CW": lambda: client.read("cws"),
    }
    for _ in range(repetitions):
        for label in READ_LABELS:
            start = client.transport.now()
            read_ops[label]()
            reads[label].append(client.transport.now() - start + rng.uniform(*client_rtt))
    return {"unit": "simulated_ms", "repetitions": repetitions, "purpose": purpose,
            "write": writes, "read": reads, "failures": failures}


# ---- entry point -----------------------------------------------------------------


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="synthrank-node", description="Run a simulated validator network behind an HTTP API.")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8008)
    parser.add_argument("--config", type=Path, help="network config JSON (nodes, f, seed, timeouts, faults, roles)")
    parser.add_argument("--key-dir", type=Path, default=os.environ.get("SYNTHRANK_KEY_DIR"),
                        help="register <role>.pub keys found here as transactors (default $SYNTHRANK_KEY_DIR)")
    parser.add_argument("--data-dir", type=Path, help="persist block logs and state snapshots here")
    parser.add_argument("--node", type=int, default=0, help="validator that serves the API")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(asctime)s %(levelname)s %(message)s")

    config = NetworkConfig.load(args.config) if args.config else NetworkConfig()
    if args.key_dir:
        config = NetworkConfig.from_json({**config.to_json(), "roles": {**config.roles, **roles_from_key_dir(args.key_dir)}})
    if not config.roles:
        parser.error("no transactor keys: pass --key-dir or a config with roles")
    network = Network(config, data_dir=args.data_dir, record_messages=False)
    service = NodeService(network, args.node)
    server = serve(service, args.host, args.port)
    log.info("validator %d of %d listening on http://%s:%d", args.node, config.n, args.host, args.port)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.driver.stopped.set()
        server.server_close()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
