"""Transactions, batches and blocks.

Each structure carries a header dict, the signature over its canonical bytes,
and its body. Identifiers are the SHA-512 of the header bytes, so they are
known before a signature is checked and never depend on signature encoding.
"""

from __future__ import annotations

import enum
import os
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from typing import Any

from .. import canonical
from .crypto import CryptoError, KeyPair, verify

FAMILY_NAME = "synthrank"
FAMILY_VERSION = "1.0"
NULL_BLOCK_ID = "0" * 128


class Role(str, enum.Enum):
    PRODUCT_MANAGER = "product_manager"
    DATA_SCIENTIST = "data_scientist"
    AUDITOR = "auditor"
    OBSERVER = "observer"


class StructureError(ValueError):
    pass


def _signed(public_key: str, header: Mapping[str, Any], signature: str) -> bool:
    try:
        return verify(public_key, canonical.encode(header), signature)
    except CryptoError:
        return False


@dataclass(frozen=True)
class Transaction:
    header: Mapping[str, Any]
    header_signature: str
    payload: bytes

    @property
    def id(self) -> str:
        return canonical.digest(self.header)

    @property
    def signer(self) -> str:
        return self.header["signer_public_key"]

    def problems(self) -> list[str]:
        out = []
        if canonical.sha512_hex(self.payload) != self.header.get("payload_sha512"):
            out.append("payload digest mismatch")
        if (self.header.get("family_name"), self.header.get("family_version")) != (
            FAMILY_NAME,
            FAMILY_VERSION,
        ):
            out.append("unknown transaction family")
        if not _signed(self.header.get("signer_public_key", ""), self.header, self.header_signature):
            out.append("invalid signature")
        return out

    def to_json(self) -> dict[str, Any]:
        return {
            "header": dict(self.header),
            "header_signature": self.header_signature,
            "payload": self.payload.decode("utf-8"),
        }

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> Transaction:
        try:
            return cls(dict(data["header"]), str(data["header_signature"]), data["payload"].encode("utf-8"))
        except (KeyError, TypeError, AttributeError) as exc:
            raise StructureError(f"malformed transaction: {exc}") from None


def make_transaction(
    signer: KeyPair,
    payload: bytes,
    inputs: Sequence[str],
    outputs: Sequence[str],
    *,
    nonce: str | None = None,
    batcher_public_key: str | None = None,
) -> Transaction:
    header = {
        "signer_public_key": signer.public_key,
        "batcher_public_key": batcher_public_key or signer.public_key,
        "family_name": FAMILY_NAME,
        "family_version": FAMILY_VERSION,
        "inputs": sorted(inputs),
        "outputs": sorted(outputs),
        "payload_sha512": canonical.sha512_hex(payload),
        "nonce": nonce if nonce is not None else os.urandom(16).hex(),
    }
    return Transaction(header, signer.sign(canonical.encode(header)), payload)


@dataclass(frozen=True)
class Batch:
    header: Mapping[str, Any]
    header_signature: str
    transactions: tuple[Transaction, ...]

    @property
    def id(self) -> str:
        return canonical.digest(self.header)

    @property
    def signer(self) -> str:
        return self.header["signer_public_key"]

    def problems(self) -> list[str]:
        out = []
        if not self.transactions:
            out.append("empty batch")
        if list(self.header.get("transaction_ids", [])) != [t.id for t in self.transactions]:
            out.append("transaction id list mismatch")
        if not _signed(self.header.get("signer_public_key", ""), self.header, self.header_signature):
            out.append("invalid signature")
        for t in self.transactions:
            for p in t.problems():
                out.append(f"transaction {t.id[:12]}: {p}")
            if t.header.get("batcher_public_key") != self.header.get("signer_public_key"):
                out.append(f"transaction {t.id[:12]}: batcher key mismatch")
        return out

    def to_json(self) -> dict[str, Any]:
        return {
            "header": dict(self.header),
            "header_signature": self.header_signature,
            "transactions": [t.to_json() for t in self.transactions],
        }

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> Batch:
        try:
            txns = tuple(Transaction.from_json(t) for t in data["transactions"])
            return cls(dict(data["header"]), str(data["header_signature"]), txns)
        except (KeyError, TypeError) as exc:
            raise StructureError(f"malformed batch: {exc}") from None


def make_batch(signer: KeyPair, transactions: Iterable[Transaction]) -> Batch:
    txns = tuple(transactions)
    header = {"signer_public_key": signer.public_key, "transaction_ids": [t.id for t in txns]}
    return Batch(header, signer.sign(canonical.encode(header)), txns)


@dataclass(frozen=True)
class Block:
    header: Mapping[str, Any]
    header_signature: str
    batches: tuple[Batch, ...] = field(default=())

    @property
    def id(self) -> str:
        return canonical.digest(self.header)

    @property
    def height(self) -> int:
        return self.header["height"]

    @property
    def previous_block_id(self) -> str:
        return self.header["previous_block_id"]

    @property
    def state_root(self) -> str:
        return self.header["state_root"]

    @property
    def settings(self) -> Mapping[str, Any] | None:
        return self.header.get("settings")

    def problems(self) -> list[str]:
        out = []
        if [b.id for b in self.batches] != list(self.header.get("batch_ids", [])):
            out.append("batch id list mismatch")
        if self.height == 0:
            if self.batches or self.previous_block_id != NULL_BLOCK_ID:
                out.append("malformed genesis block")
            return out
        if not _signed(self.header.get("signer_public_key", ""), self.header, self.header_signature):
            out.append("invalid block signature")
        for b in self.batches:
            out.extend(f"batch {b.id[:12]}: {p}" for p in b.problems())
        return out

    def to_json(self) -> dict[str, Any]:
        return {
            "header": dict(self.header),
            "header_signature": self.header_signature,
            "batches": [b.to_json() for b in self.batches],
        }

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> Block:
        try:
            batches = tuple(Batch.from_json(b) for b in data["batches"])
            return cls(dict(data["header"]), str(data["header_signature"]), batches)
        except (KeyError, TypeError) as exc:
            raise StructureError(f"malformed block: {exc}") from None


def make_block(
    signer: KeyPair,
    height: int,
    previous_block_id: str,
    batches: Sequence[Batch],
    state_root: str,
) -> Block:
    header = {
        "height": height,
        "previous_block_id": previous_block_id,
        "batch_ids": [b.id for b in batches],
        "state_root": state_root,
        "signer_public_key": signer.public_key,
    }
    return Block(header, signer.sign(canonical.encode(header)), tuple(batches))


def make_genesis(settings: Mapping[str, Any], state_root: str) -> Block:
    """Height-0 block carrying the network settings; unsigned by design,
    every validator derives it from the same configuration."""
    header = {
        "height": 0,
        "previous_block_id": NULL_BLOCK_ID,
        "batch_ids": [],
        "state_root": state_root,
        "settings": canonical.decode(canonical.encode(dict(settings))),
    }
    return Block(header, "", ())


def role_registry(settings: Mapping[str, Any]) -> dict[str, Role]:
    return {pk: Role(r) for pk, r in settings.get("roles", {}).items()}
