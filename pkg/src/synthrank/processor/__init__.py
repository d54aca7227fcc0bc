from .audit import AuditReport, Finding, run_audit
from .handler import (
    PERMISSIONS,
    BatchResult,
    InvalidTransaction,
    apply,
    build_payload,
    declared_addresses,
    execute_batches,
)
from .schemas import COMMANDS, FILE_NAMES, SchemaError, decode_payload, encode_payload, parse_document

__all__ = [
    "COMMANDS",
    "FILE_NAMES",
    "PERMISSIONS",
    "AuditReport",
    "BatchResult",
    "Finding",
    "InvalidTransaction",
    "SchemaError",
    "apply",
    "build_payload",
    "declared_addresses",
    "decode_payload",
    "encode_payload",
    "execute_batches",
    "parse_document",
    "run_audit",
]
