"""Command-line client.

Registration verbs read a JSON file, wrap it in a signed transaction and
batch, submit it, and poll until the batch is committed or rejected. Read
verbs fetch committed state and print it.

Exit codes: 0 success, 1 user error (bad file, missing key, unknown
purpose), 2 rejected by the node or not committed before the timeout.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
import urllib.error
import urllib.request
from dataclasses import dataclass
from itertools import count
from pathlib import Path
from typing import Any, Callable

from . import canonical
from .ledger.chain import make_batch, make_transaction
from .ledger.crypto import CryptoError, KeyPair, read_keypair, write_keypair
from .ledger.state import make_address
from .processor.handler import build_payload
from .processor.schemas import FILE_NAMES, SchemaError, parse_document
from .processor.views import KEY_FIELD, REGISTRY

DEFAULT_URL = "http://127.0.0.1:8008"
DEFAULT_TIMEOUT = 30.0
POLL_INTERVAL = 0.2
KEY_DIR_ENV = "SYNTHRANK_KEY_DIR"

EXIT_OK, EXIT_USER, EXIT_REJECTED = 0, 1, 2

REGISTER_VERBS = ("qi", "cw", "wmp", "wmm", "method")
READ_VERBS = {"qis": "qi", "cws": "cw", "wmps": "wmp", "wmms": "wmm", "methods": "method"}


class UserError(Exception):
    pass


class NodeError(Exception):
    pass


def default_key_dir() -> Path:
    return Path(os.environ.get(KEY_DIR_ENV, Path.home() / ".synthrank" / "keys"))


# ---- transports ------------------------------------------------------------------


class HttpTransport:
    def __init__(self, url: str = DEFAULT_URL, poll_interval: float = POLL_INTERVAL):
        self.url = url.rstrip("/")
        self.poll_interval = poll_interval

    def request(self, method: str, path: str, body: Any = None) -> tuple[int, dict[str, Any]]:
        data = canonical.encode(body) if body is not None else None
        req = urllib.request.Request(self.url + path, data=data, method=method,
                                     headers={"Content-Type": "application/json"})
        try:
            with urllib.request.urlopen(req, timeout=10) as resp:
                return resp.status, json.loads(resp.read())
        except urllib.error.HTTPError as exc:
            return exc.code, json.loads(exc.read() or b"{}")
        except urllib.error.URLError as exc:
            raise UserError(f"cannot reach node at {self.url}: {exc.reason}") from None

    def wait(self, batch_id: str, timeout: float) -> dict[str, Any]:
        deadline = time.monotonic() + timeout
        while True:
            _, doc = self.request("GET", f"/batch_statuses?id={batch_id}")
            st = doc["data"][0]
            if st["status"] in ("COMMITTED", "INVALID") or time.monotonic() >= deadline:
                return st
            time.sleep(self.poll_interval)

    def now(self) -> float:
        return time.monotonic() * 1000.0


class LocalTransport:
    """Talks to an in-process ``NodeService``, advancing its simulated
    network while waiting instead of sleeping."""

    def __init__(self, service):
        self.service = service

    def request(self, method: str, path: str, body: Any = None) -> tuple[int, dict[str, Any]]:
        raw = canonical.encode(body) if body is not None else None
        code, doc = self.service.handle(method, path, raw)
        # round-trip through JSON like the wire would
        return code, json.loads(canonical.encode(doc))

    def wait(self, batch_id: str, timeout: float) -> dict[str, Any]:
        net = self.service.network
        node = self.service.node
        net.run_while(lambda: node.status(batch_id)[0] not in ("committed", "invalid"), net.now + timeout * 1000.0)
        return self.service.batch_status(batch_id)

    def now(self) -> float:
        return self.service.network.now


# ---- client library ------------------------------------------------------------------


@dataclass(frozen=True)
class SubmitResult:
    batch_id: str
    status: str
    height: int | None = None
    reason: str = ""

    @property
    def committed(self) -> bool:
        return self.status == "COMMITTED"


class Client:
    def __init__(
        self,
        transport,
        key_dir: Path | None = None,
        keys: dict[str, KeyPair] | None = None,
        timeout: float = DEFAULT_TIMEOUT,
        nonce: Callable[[], str] | None = None,
    ):
        self.transport = transport
        self.key_dir = key_dir
        self.keys = dict(keys or {})
        self.timeout = timeout
        self._nonce = nonce

    @classmethod
    def deterministic_nonces(cls, prefix: str) -> Callable[[], str]:
        counter = count()
        return lambda: f"{prefix}-{next(counter)}"

    def keypair(self, name: str) -> KeyPair:
        if name not in self.keys:
            if self.key_dir is None:
                raise UserError(f"unknown key {name!r}")
            try:
                self.keys[name] = read_keypair(self.key_dir, name)
            except (FileNotFoundError, CryptoError) as exc:
                raise UserError(str(exc)) from None
        return self.keys[name]

    def submit(self, verb: str, args: Any, key: str) -> SubmitResult:
        signer = self.keypair(key)
        try:
            payload, inputs, outputs = build_payload(verb, args)
        except SchemaError as exc:
            raise UserError(str(exc)) from None
        nonce = self._nonce() if self._nonce else None
        txn = make_transaction(signer, payload, inputs, outputs, nonce=nonce)
        batch = make_batch(signer, [txn])
        code, doc = self.transport.request("POST", "/batches", batch.to_json())
        if code >= 300:
            return SubmitResult(batch.id, "REJECTED", reason=doc.get("error", f"HTTP {code}"))
        st = self.transport.wait(batch.id, self.timeout)
        return SubmitResult(batch.id, st["status"], st.get("height"), st.get("reason", ""))

    def register_file(self, verb: str, path: Path, key: str) -> SubmitResult:
        return self.submit(verb, load_document(verb, path), key)

    @staticmethod
    def audit_args(documents: dict[str, Any]) -> dict[str, Any]:
        texts = {v: canonical.dumps(documents[v]) for v in ("qi", "cw", "wmp", "wmm", "method")}
        return audit_payload(texts)

    # reads

    def _category(self, category: str) -> list[dict[str, Any]]:
        code, doc = self.transport.request("GET", f"/state?category={category}")
        if code != 200:
            raise NodeError(doc.get("error", f"HTTP {code}"))
        return [e["data"] for e in doc["data"]]

    def _address(self, address: str) -> dict[str, Any] | None:
        code, doc = self.transport.request("GET", f"/state/{address}")
        if code != 200:
            raise NodeError(doc.get("error", f"HTTP {code}"))
        return doc["data"][0]["data"] if doc["data"] else None

    def read(self, verb: str, purpose: str | None = None) -> Any:
        if verb in READ_VERBS:
            category, inner = REGISTRY[READ_VERBS[verb]]
            field = KEY_FIELD[category]
            return {e[field]: e[inner] for e in sorted(self._category(category), key=lambda e: e[field])}
        if verb == "ranks":
            return {e["purpose"]: e for e in sorted(self._category("rankings"), key=lambda e: e["purpose"])}
        if verb == "rank":
            if not purpose:
                raise UserError("rank needs a purpose")
            doc = self._address(make_address("rankings", purpose))
            if doc is None:
                raise UserError(f"purpose not found: {purpose}")
            return doc
        if verb == "isConsistent":
            reports = self._category("audit")
            if not reports:
                raise UserError("no audit recorded")
            return max(reports, key=lambda r: (r["height"], r["run_id"]))
        raise UserError(f"unknown read verb {verb!r}")

    def generator_order(self) -> list[str]:
        gens = self._category("generators")
        return [g["generator"] for g in sorted(gens, key=lambda g: (g["order"], g["generator"]))]


def audit_payload(texts: dict[str, str]) -> dict[str, Any]:
    return {
        "pm_files": {k: texts[k] for k in ("qi", "cw", "wmp", "wmm")},
        "ds_files": {"method": texts["method"]},
    }


def load_document(verb: str, path: Path) -> Any:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UserError(f"{path}: {exc.strerror}") from None
    try:
        return parse_document(verb, text)
    except SchemaError as exc:
        raise UserError(f"{path}: {exc}") from None


# ---- rendering ----------------------------------------------------------------------------


def format_ranking(doc: dict[str, Any]) -> str:
    lines = [f"purpose {doc['purpose']}"]
    lines.append(f"{'rank':>4}  {'generator':<16} {'desired':>10} {'undesired':>10} {'overall':>10}")
    for e in doc["entries"]:
        lines.append(
            f"{e['rank']:>4}  {e['generator']:<16} {e['desired_score']:>10.4f} "
            f"{e['undesired_score']:>10.4f} {e['overall_score']:>10.4f}"
        )
    return "\n".join(lines)


def format_audit(doc: dict[str, Any]) -> str:
    lines = [f"audit {doc['run_id'][:16]} at height {doc['height']}"]
    for f in doc["findings"]:
        mark = "ok  " if f["ok"] else "FAIL"
        lines.append(f"  {mark} {f['purpose']:<8} {f['check']:<10} {f['detail']}".rstrip())
    lines.append(f"isConsistent: {'true' if doc['isConsistent'] else 'false'}")
    return "\n".join(lines)


# ---- CLI ------------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--url", default=os.environ.get("SYNTHRANK_URL", DEFAULT_URL))
    common.add_argument("--key", help="name of the signing key in the key directory")
    common.add_argument("--key-dir", type=Path, default=None, help=f"defaults to ${KEY_DIR_ENV} or ~/.synthrank/keys")
    common.add_argument("--timeout", type=float, default=DEFAULT_TIMEOUT, help="seconds to wait for commit")
    common.add_argument("--json", action="store_true", help="print canonical JSON")

    parser = argparse.ArgumentParser(prog="synthrank", description="Purpose-specific ranking ledger client.")
    sub = parser.add_subparsers(dest="verb", required=True)
    kg = sub.add_parser("keygen", parents=[common], help="create a signing key pair")
    kg.add_argument("name")
    kg.add_argument("--force", action="store_true")
    for verb in REGISTER_VERBS:
        p = sub.add_parser(verb, parents=[common], help=f"register {FILE_NAMES[verb]}")
        p.add_argument("file", type=Path)
    q = sub.add_parser("qos", parents=[common], help="compute and record rankings for the purposes in compute.txt")
    q.add_argument("file", type=Path)
    r = sub.add_parser("rank", parents=[common], help="show the ranking of one purpose")
    r.add_argument("purpose")
    sub.add_parser("ranks", parents=[common], help="show every ranking")
    a = sub.add_parser("audit", parents=[common], help="audit the ledger against local copies of the inputs")
    for verb in ("qi", "cw", "wmp", "wmm", "method"):
        a.add_argument(f"--{verb}", dest=f"{verb}_file", type=Path, default=Path(FILE_NAMES[verb]))
    sub.add_parser("isConsistent", parents=[common], help="show the latest audit verdict")
    for verb in READ_VERBS:
        sub.add_parser(verb, parents=[common], help=f"show registered {READ_VERBS[verb]} data")
    return parser


def _report(result: SubmitResult, out) -> int:
    if result.committed:
        print(f"batch {result.batch_id[:16]} committed at height {result.height}", file=out)
        return EXIT_OK
    reason = f": {result.reason}" if result.reason else ""
    print(f"batch {result.batch_id[:16]} {result.status.lower()}{reason}", file=out)
    return EXIT_REJECTED


def main(argv: list[str] | None = None, transport=None, out=None, err=None, nonce=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    args = build_parser().parse_args(argv)
    key_dir = args.key_dir or default_key_dir()
    try:
        if args.verb == "keygen":
            kp = KeyPair.generate()
            try:
                priv, pub = write_keypair(key_dir, args.name, kp, force=args.force)
            except FileExistsError as exc:
                raise UserError(str(exc)) from None
            print(f"wrote {priv} and {pub}", file=out)
            print(kp.public_key, file=out)
            return EXIT_OK

        client = Client(transport or HttpTransport(args.url), key_dir=key_dir, timeout=args.timeout, nonce=nonce)

        def need_key() -> str:
            if not args.key:
                raise UserError(f"{args.verb} needs --key")
            return args.key

        if args.verb in REGISTER_VERBS or args.verb == "qos":
            doc = load_document(args.verb, args.file)
            return _report(client.submit(args.verb, doc, need_key()), out)
        if args.verb == "audit":
            texts = {}
            for verb in ("qi", "cw", "wmp", "wmm", "method"):
                path = getattr(args, f"{verb}_file")
                try:
                    texts[verb] = path.read_text(encoding="utf-8")
                except OSError as exc:
                    raise UserError(f"{path}: {exc.strerror}") from None
            code = _report(client.submit("audit", audit_payload(texts), need_key()), out)
            if code == EXIT_OK:
                print(format_audit(client.read("isConsistent")), file=out)
            return code

        doc = client.read(args.verb, getattr(args, "purpose", None))
        if args.json or args.verb in READ_VERBS:
            print(canonical.dumps(doc), file=out)
        elif args.verb == "rank":
            print(format_ranking(doc), file=out)
        elif args.verb == "ranks":
            print("\n\n".join(format_ranking(d) for d in doc.values()), file=out)
        else:
            print(format_audit(doc), file=out)
        return EXIT_OK
    except UserError as exc:
        print(f"error: {exc}", file=err)
        return EXIT_USER
    except NodeError as exc:
        print(f"node error: {exc}", file=err)
        return EXIT_REJECTED


if __name__ == "__main__":
    raise SystemExit(main())
