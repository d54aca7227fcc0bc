"""Signed consensus and gossip messages exchanged between validators."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Any, Mapping

from .. import canonical
from ..ledger.crypto import CryptoError, KeyPair, verify

PRE_PREPARE = "PrePrepare"
PREPARE = "Prepare"
COMMIT = "Commit"
VIEW_CHANGE = "ViewChange"
NEW_VIEW = "NewView"
BATCH = "Batch"
STATUS = "Status"
FETCH_REQUEST = "FetchRequest"
FETCH_RESPONSE = "FetchResponse"

PROTOCOL_KINDS = (PRE_PREPARE, PREPARE, COMMIT, VIEW_CHANGE, NEW_VIEW)
KINDS = PROTOCOL_KINDS + (BATCH, STATUS, FETCH_REQUEST, FETCH_RESPONSE)


@dataclass(frozen=True)
class Message:
    kind: str
    view: int
    seq: int
    sender: int
    digest: str = ""
    body: Mapping[str, Any] | None = field(default=None, compare=False)
    signature: str = ""

    def _unsigned(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "view": self.view,
            "seq": self.seq,
            "sender": self.sender,
            "digest": self.digest,
            "body": self.body,
        }

    @cached_property
    def signing_bytes(self) -> bytes:
        return canonical.encode(self._unsigned())

    def signed(self, keypair: KeyPair) -> Message:
        return replace(self, signature=keypair.sign(self.signing_bytes))

    def verify(self, public_key: str) -> bool:
        try:
            return verify(public_key, self.signing_bytes, self.signature)
        except CryptoError:
            return False

    def to_json(self) -> dict[str, Any]:
        return {**self._unsigned(), "signature": self.signature}

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> Message:
        return cls(
            data["kind"],
            data["view"],
            data["seq"],
            data["sender"],
            data.get("digest", ""),
            data.get("body"),
            data.get("signature", ""),
        )

    def __repr__(self):
        return f"{self.kind}(v={self.view}, s={self.seq}, from={self.sender}, d={self.digest[:8]})"


def count_valid(
    messages: list[Mapping[str, Any]], kind: str, seq: int, digest: str, keys: list[str], view: int | None = None
) -> int:
    """Distinct validators with a correctly signed ``kind`` vote for (seq, digest)."""
    senders = set()
    for raw in messages:
        try:
            m = Message.from_json(raw)
        except (KeyError, TypeError):
            continue
        if m.kind != kind or m.seq != seq or m.digest != digest:
            continue
        if view is not None and m.view != view:
            continue
        if not (0 <= m.sender < len(keys)) or m.sender in senders:
            continue
        if m.verify(keys[m.sender]):
            senders.add(m.sender)
    return len(senders)
