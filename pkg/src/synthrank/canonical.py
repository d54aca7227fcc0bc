"""Canonical JSON encoding used for every payload, header and digest.

Keys are sorted, separators carry no whitespace, and floats use Python's
shortest round-trip ``repr``, so equal documents always hash equally.
"""

from __future__ import annotations

import hashlib
import json
from typing import Any


def dumps(obj: Any) -> str:
    return json.dumps(
        obj,
        sort_keys=True,
        separators=(",", ":"),
        ensure_ascii=False,
        allow_nan=False,
    )


def encode(obj: Any) -> bytes:
    """Canonical UTF-8 bytes for ``obj``."""
    return dumps(obj).encode("utf-8")


def decode(data: bytes | str) -> Any:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    return json.loads(data)


def is_canonical(data: bytes) -> bool:
    """True when ``data`` is exactly the canonical encoding of what it parses to."""
    try:
        return encode(decode(data)) == data
    except (ValueError, UnicodeDecodeError):
        return False


def sha512_hex(data: bytes | str) -> str:
    if isinstance(data, str):
        data = data.encode("utf-8")
    return hashlib.sha512(data).hexdigest()


def digest(obj: Any) -> str:
    return sha512_hex(encode(obj))
