"""The synthrank transaction family.

``apply`` is a pure function of the transaction and the state it can see:
no clock, no randomness, no I/O. Every rejection raises
``InvalidTransaction`` with a message that is identical on all nodes.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from typing import Any

from .. import canonical
from ..ledger.chain import Batch, Role, Transaction
from ..ledger.state import AddressError, LedgerState, StateOverlay, make_address, namespace
from ..ranking import RankingError, rank_all_purposes
from . import views
from .audit import run_audit
from .schemas import SchemaError, decode_payload, encode_payload

PERMISSIONS: dict[str, frozenset[Role]] = {
    "qi": frozenset({Role.PRODUCT_MANAGER}),
    "cw": frozenset({Role.PRODUCT_MANAGER}),
    "wmp": frozenset({Role.PRODUCT_MANAGER}),
    "wmm": frozenset({Role.PRODUCT_MANAGER}),
    "method": frozenset({Role.DATA_SCIENTIST}),
    "audit": frozenset({Role.AUDITOR}),
    "qos": frozenset(Role),
}


class InvalidTransaction(Exception):
    pass


def authorize(command: str, role: Role | None):
    if role is None or role not in PERMISSIONS[command]:
        raise InvalidTransaction("permission denied")


_SPEC_INPUTS = ("qi", "qi_weights", "wm_plus", "wm_minus", "generators", "evaluation")


def declared_addresses(command: str, args: Any) -> tuple[list[str], list[str]]:
    """Input and output addresses (or namespace prefixes) a transaction declares."""
    qi_ns = namespace("qi")
    if command == "qi":
        return [qi_ns], [make_address("qi", q) for q in args]
    if command in ("cw", "wmp", "wmm"):
        category = views.REGISTRY[command][0]
        return [qi_ns], [make_address(category, p) for p in args]
    if command == "method":
        outs = [make_address(c, g) for g in args for c in ("generators", "evaluation")]
        return [qi_ns, namespace("generators")], outs
    if command == "qos":
        return [namespace(c) for c in _SPEC_INPUTS], [make_address("rankings", p) for p in args["purposes"]]
    if command == "audit":
        return [namespace(c) for c in _SPEC_INPUTS + ("rankings",)], [namespace("audit")]
    raise SchemaError(f"unknown command {command!r}")


def build_payload(command: str, args: Any) -> tuple[bytes, list[str], list[str]]:
    payload = encode_payload(command, args)
    inputs, outputs = declared_addresses(command, args)
    return payload, inputs, outputs


class TxnContext:
    """State access restricted to the transaction's declared addresses."""

    def __init__(self, overlay: StateOverlay, txn: Transaction, height: int):
        self._overlay = overlay
        self.inputs = tuple(txn.header.get("inputs", ()))
        self.outputs = tuple(txn.header.get("outputs", ()))
        self.signer = txn.signer
        self.height = height

    @staticmethod
    def _covered(address: str, allowed: Sequence[str]) -> bool:
        return any(address.startswith(p) for p in allowed)

    def get(self, address: str) -> bytes | None:
        if not self._covered(address, self.inputs + self.outputs):
            raise InvalidTransaction(f"read of {address[:12]}... outside declared inputs")
        return self._overlay.get(address)

    def items(self, prefix: str = "") -> list[tuple[str, bytes]]:
        allowed = self.inputs + self.outputs
        if not any(prefix.startswith(p) for p in allowed):
            raise InvalidTransaction(f"scan of {prefix or '<all>'} outside declared inputs")
        return self._overlay.items(prefix)

    def set(self, address: str, payload: bytes):
        if not self._covered(address, self.outputs):
            raise InvalidTransaction(f"write to {address[:12]}... outside declared outputs")
        self._overlay.set(address, payload)


def _require_metrics(ctx: TxnContext, metrics, what: str):
    owner = views.metric_owner(views.quality_indicators(ctx))
    for m in sorted(metrics):
        if m not in owner:
            raise InvalidTransaction(f"{what}: metric not registered: {m}")
    return owner


def _register_qi(ctx: TxnContext, args: Mapping[str, Any]):
    existing = views.quality_indicators(ctx)
    owners = {m: q for q, ms in existing.items() if q not in args for m in ms}
    seen: dict[str, str] = {}
    for qi, metrics in sorted(args.items()):
        for m in metrics:
            other = owners.get(m) or seen.get(m)
            if other is not None and other != qi:
                raise InvalidTransaction(f"metric {m} already belongs to quality indicator {other}")
            seen[m] = qi
    for qi, metrics in sorted(args.items()):
        ctx.set(*views.entry("qi", qi, {"metrics": metrics}))


def _register_weights(ctx: TxnContext, command: str, args: Mapping[str, Any]):
    category = views.REGISTRY[command][0]
    if command == "cw":
        known = views.quality_indicators(ctx)
        for purpose, weights in sorted(args.items()):
            for q in sorted(weights):
                if q not in known:
                    raise InvalidTransaction(f"purpose {purpose}: quality indicator not registered: {q}")
    else:
        for purpose, weights in sorted(args.items()):
            _require_metrics(ctx, weights, f"purpose {purpose}")
    for purpose, weights in sorted(args.items()):
        ctx.set(*views.entry(category, purpose, {"weights": weights}))


def _register_method(ctx: TxnContext, args: Mapping[str, Any]):
    for generator, scores in sorted(args.items()):
        _require_metrics(ctx, scores, f"generator {generator}")
    known = views.read_all(ctx, "generators")
    next_order = max((d["order"] for d in known.values()), default=-1) + 1
    # canonical payloads sort keys, so generators in one file register in name order
    for generator, scores in sorted(args.items()):
        if generator not in known:
            ctx.set(*views.entry("generators", generator, {"order": next_order}))
            next_order += 1
        ctx.set(*views.entry("evaluation", generator, {"scores": scores}))


def _compute_qos(ctx: TxnContext, args: Mapping[str, Any]):
    purposes = list(args["purposes"])
    qis = views.quality_indicators(ctx)
    try:
        specs = [views.purpose_spec(ctx, p, qis) for p in purposes]
        needed = {m for s in specs for m in s.metrics}
        evaluation = views.evaluation_matrix(ctx, needed)
        results = rank_all_purposes(specs, evaluation)
    except views.MissingItem as exc:
        raise InvalidTransaction(str(exc)) from None
    except (RankingError, ValueError) as exc:
        raise InvalidTransaction(str(exc)) from None
    for purpose in purposes:
        ctx.set(make_address("rankings", purpose), canonical.encode(results[purpose].to_json()))


def _audit(ctx: TxnContext, args: Mapping[str, Any]):
    report = run_audit(args["pm_files"], args["ds_files"], ctx, height=ctx.height, auditor=ctx.signer)
    ctx.set(make_address("audit", report.run_id), canonical.encode(report.to_json()))


def apply(txn: Transaction, overlay: StateOverlay, roles: Mapping[str, Role], height: int):
    problems = txn.problems()
    if problems:
        raise InvalidTransaction(problems[0])
    try:
        command, args = decode_payload(txn.payload)
    except SchemaError as exc:
        raise InvalidTransaction(f"malformed payload: {exc}") from None
    authorize(command, roles.get(txn.signer))
    ctx = TxnContext(overlay, txn, height)
    try:
        if command == "qi":
            _register_qi(ctx, args)
        elif command in ("cw", "wmp", "wmm"):
            _register_weights(ctx, command, args)
        elif command == "method":
            _register_method(ctx, args)
        elif command == "qos":
            _compute_qos(ctx, args)
        elif command == "audit":
            _audit(ctx, args)
    except AddressError as exc:
        raise InvalidTransaction(str(exc)) from None


@dataclass(frozen=True)
class BatchResult:
    batch_id: str
    valid: bool
    reason: str = ""

    def to_json(self) -> dict[str, Any]:
        return {"batch_id": self.batch_id, "valid": self.valid, "reason": self.reason}


def execute_batches(
    state: LedgerState, batches: Sequence[Batch], roles: Mapping[str, Role], height: int
) -> tuple[LedgerState, list[BatchResult]]:
    """Run batches in order against a copy of ``state``.

    A batch is atomic: if any of its transactions is rejected, none of its
    writes survive and the batch is marked invalid with the first reason.
    """
    new_state = state.snapshot()
    results = []
    for batch in batches:
        problems = batch.problems()
        if problems:
            results.append(BatchResult(batch.id, False, problems[0]))
            continue
        overlay = StateOverlay(new_state)
        try:
            for txn in batch.transactions:
                apply(txn, overlay, roles, height)
        except InvalidTransaction as exc:
            results.append(BatchResult(batch.id, False, str(exc)))
            continue
        overlay.merge_into_base()
        results.append(BatchResult(batch.id, True))
    return new_state, results
