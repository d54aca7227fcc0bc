from .chain import (
    NULL_BLOCK_ID,
    Batch,
    Block,
    Role,
    StructureError,
    Transaction,
    make_batch,
    make_block,
    make_genesis,
    make_transaction,
    role_registry,
)
from .crypto import CryptoError, KeyPair, sign, verify
from .state import (
    CATEGORIES,
    EMPTY_ROOT,
    AddressError,
    LedgerState,
    StateOverlay,
    check_address,
    make_address,
    namespace,
)
from .store import BlockStore, StoreError

__all__ = [
    "CATEGORIES",
    "EMPTY_ROOT",
    "NULL_BLOCK_ID",
    "AddressError",
    "Batch",
    "Block",
    "BlockStore",
    "CryptoError",
    "KeyPair",
    "LedgerState",
    "Role",
    "StateOverlay",
    "StoreError",
    "StructureError",
    "Transaction",
    "check_address",
    "make_address",
    "make_batch",
    "make_block",
    "make_genesis",
    "make_transaction",
    "namespace",
    "role_registry",
    "sign",
    "verify",
]
