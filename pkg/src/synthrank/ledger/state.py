"""Namespaced, content-addressed global state.

An address is 70 hex characters: six characters naming the category
namespace followed by 64 characters derived from the key. The state root is
the SHA-512 of the sorted list of (address, payload digest) pairs, so two
states with the same contents have the same root however they were built.
"""

from __future__ import annotations

import re
from collections.abc import Iterable, Iterator, Mapping

from .. import canonical

FAMILY = "synthrank"
CATEGORIES = (
    "generators",
    "qi",
    "qi_weights",
    "wm_plus",
    "wm_minus",
    "evaluation",
    "rankings",
    "audit",
)
ADDRESS_RE = re.compile(r"^[0-9a-f]{70}$")
PREFIX_RE = re.compile(r"^[0-9a-f]{0,70}$")


class AddressError(ValueError):
    pass


def namespace(category: str) -> str:
    if category not in CATEGORIES:
        raise AddressError(f"unknown category {category!r}")
    return canonical.sha512_hex(f"{FAMILY}.{category}")[:6]


def make_address(category: str, key: str) -> str:
    if not key:
        raise AddressError("address key must be non-empty")
    return namespace(category) + canonical.sha512_hex(key)[:64]


def check_address(address: str) -> str:
    if not isinstance(address, str) or not ADDRESS_RE.match(address):
        raise AddressError(f"malformed address {address!r}")
    return address


def check_prefix(prefix: str) -> str:
    if not isinstance(prefix, str) or not PREFIX_RE.match(prefix):
        raise AddressError(f"malformed address prefix {prefix!r}")
    return prefix


def category_of(address: str) -> str | None:
    head = address[:6]
    for c in CATEGORIES:
        if namespace(c) == head:
            return c
    return None


def state_root(pairs: Iterable[tuple[str, str]]) -> str:
    return canonical.digest(sorted([a, d] for a, d in pairs))


EMPTY_ROOT = state_root([])


class LedgerState:
    """Address -> canonical JSON payload bytes.

    Owned by one executor; readers take ``snapshot()`` copies.
    """

    def __init__(self, entries: Mapping[str, bytes] | None = None):
        self._data: dict[str, bytes] = {}
        self._digests: dict[str, str] = {}
        self._root: str | None = None
        for address, payload in (entries or {}).items():
            self._put(address, payload)

    def _put(self, address: str, payload: bytes):
        check_address(address)
        if not isinstance(payload, bytes) or not canonical.is_canonical(payload):
            raise ValueError(f"payload for {address[:12]}... is not canonical JSON")
        self._data[address] = payload
        self._digests[address] = canonical.sha512_hex(payload)

    def get(self, address: str) -> bytes | None:
        return self._data.get(check_address(address))

    def set(self, address: str, payload: bytes) -> str:
        self._put(address, payload)
        self._root = None
        return self.root

    def set_many(self, writes: Mapping[str, bytes]) -> str:
        for address, payload in sorted(writes.items()):
            self._put(address, payload)
        self._root = None
        return self.root

    @property
    def root(self) -> str:
        if self._root is None:
            self._root = state_root(self._digests.items())
        return self._root

    def items(self, prefix: str = "") -> list[tuple[str, bytes]]:
        check_prefix(prefix)
        return sorted((a, p) for a, p in self._data.items() if a.startswith(prefix))

    def snapshot(self) -> LedgerState:
        other = LedgerState()
        other._data = dict(self._data)
        other._digests = dict(self._digests)
        other._root = self._root
        return other

    def to_json(self) -> dict[str, str]:
        return {a: p.decode("utf-8") for a, p in sorted(self._data.items())}

    @classmethod
    def from_json(cls, data: Mapping[str, str]) -> LedgerState:
        return cls({a: p.encode("utf-8") for a, p in data.items()})

    def __contains__(self, address: str) -> bool:
        return address in self._data

    def __len__(self) -> int:
        return len(self._data)

    def __iter__(self) -> Iterator[str]:
        return iter(sorted(self._data))

    def __eq__(self, other):
        return isinstance(other, LedgerState) and self._data == other._data

    def __repr__(self):
        return f"LedgerState({len(self)} entries, root={self.root[:12]}...)"


class StateOverlay:
    """Pending writes over a base state, discarded unless merged."""

    def __init__(self, base: LedgerState | StateOverlay):
        self.base = base
        self.writes: dict[str, bytes] = {}

    def get(self, address: str) -> bytes | None:
        check_address(address)
        if address in self.writes:
            return self.writes[address]
        return self.base.get(address)

    def set(self, address: str, payload: bytes):
        check_address(address)
        if not canonical.is_canonical(payload):
            raise ValueError("payload is not canonical JSON")
        self.writes[address] = payload

    def items(self, prefix: str = "") -> list[tuple[str, bytes]]:
        merged = dict(self.base.items(prefix))
        merged.update((a, p) for a, p in self.writes.items() if a.startswith(prefix))
        return sorted(merged.items())

    def merge_into_base(self):
        if isinstance(self.base, StateOverlay):
            self.base.writes.update(self.writes)
        else:
            self.base.set_many(self.writes)
        self.writes = {}
