"""Ed25519 signing keys, hex encoded on the wire and on disk."""

from __future__ import annotations

import hashlib
from pathlib import Path

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import serialization
from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey, Ed25519PublicKey


class CryptoError(ValueError):
    pass


_RAW = dict(encoding=serialization.Encoding.Raw, format=serialization.PublicFormat.Raw)


class KeyPair:
    __slots__ = ("_sk", "public_key")

    def __init__(self, private_key: Ed25519PrivateKey):
        self._sk = private_key
        self.public_key = private_key.public_key().public_bytes(**_RAW).hex()

    @classmethod
    def generate(cls) -> KeyPair:
        return cls(Ed25519PrivateKey.generate())

    @classmethod
    def from_seed(cls, seed: bytes) -> KeyPair:
        if len(seed) != 32:
            raise CryptoError("seed must be 32 bytes")
        return cls(Ed25519PrivateKey.from_private_bytes(seed))

    @classmethod
    def derive(cls, *labels: object) -> KeyPair:
        """Deterministic key from labels; for simulations and tests only."""
        material = "\x1f".join(str(x) for x in labels).encode("utf-8")
        return cls.from_seed(hashlib.sha512(material).digest()[:32])

    @classmethod
    def from_private_hex(cls, text: str) -> KeyPair:
        try:
            raw = bytes.fromhex(text.strip())
        except ValueError as exc:
            raise CryptoError(f"malformed private key: {exc}") from None
        return cls.from_seed(raw)

    @property
    def private_hex(self) -> str:
        return self._sk.private_bytes(
            serialization.Encoding.Raw,
            serialization.PrivateFormat.Raw,
            serialization.NoEncryption(),
        ).hex()

    def sign(self, data: bytes) -> str:
        return self._sk.sign(data).hex()

    def __repr__(self):
        return f"KeyPair({self.public_key[:16]}...)"


def sign(keypair: KeyPair, data: bytes) -> str:
    return keypair.sign(data)


def load_public_key(public_key: str) -> Ed25519PublicKey:
    try:
        raw = bytes.fromhex(public_key)
        return Ed25519PublicKey.from_public_bytes(raw)
    except (ValueError, TypeError) as exc:
        raise CryptoError(f"malformed public key: {exc}") from None


def verify(public_key: str, data: bytes, signature: str) -> bool:
    """True iff ``signature`` (hex) is valid for ``data`` under ``public_key``.

    Malformed public keys raise; a malformed signature simply fails.
    """
    pk = load_public_key(public_key)
    try:
        pk.verify(bytes.fromhex(signature), data)
    except (InvalidSignature, ValueError, TypeError):
        return False
    return True


def write_keypair(directory: Path, name: str, keypair: KeyPair, force: bool = False) -> tuple[Path, Path]:
    directory.mkdir(parents=True, exist_ok=True)
    priv, pub = directory / f"{name}.priv", directory / f"{name}.pub"
    if not force and (priv.exists() or pub.exists()):
        raise FileExistsError(f"key {name!r} already exists in {directory} (use --force)")
    priv.write_text(keypair.private_hex + "\n")
    priv.chmod(0o600)
    pub.write_text(keypair.public_key + "\n")
    return priv, pub


def read_keypair(directory: Path, name: str) -> KeyPair:
    path = directory / f"{name}.priv"
    if not path.exists():
        raise FileNotFoundError(f"no private key {path}")
    return KeyPair.from_private_hex(path.read_text())
