"""Command payload schemas. They double as the input file formats of the CLI.

File formats (one JSON document per file):

    qi.txt          {qi: {metric: {"kind": ..., "constant"?: number}}}
    weights.txt     {purpose: {qi: weight}}
    WM_plus.txt     {purpose: {metric: weight}}
    WM_minus.txt    {purpose: {metric: weight}}
    inputs.txt      {generator: {metric: value}}
    compute.txt     {"purposes": [purpose, ...]}

The audit payload embeds the auditor's raw file texts so that an unparseable
file becomes a recorded finding rather than a rejected transaction.
"""

from __future__ import annotations

import json
from typing import Any

import jsonschema

from .. import canonical

COMMANDS = ("qi", "cw", "wmp", "wmm", "method", "qos", "audit")

_NAME = {"type": "string", "minLength": 1, "maxLength": 200, "pattern": r"^[^\x00-\x1f]+$"}
_WEIGHT = {"type": "number", "minimum": 0, "maximum": 1}

_CLASSIFICATION = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["lower_better", "higher_better", "closer_to_constant"]},
        "constant": {"type": "number"},
    },
    "required": ["kind"],
    "additionalProperties": False,
    "if": {"properties": {"kind": {"const": "closer_to_constant"}}},
    "then": {"required": ["kind", "constant"]},
    "else": {"not": {"required": ["constant"]}},
}


def _table(inner: dict, min_inner: int = 1) -> dict:
    return {
        "type": "object",
        "minProperties": 1,
        "propertyNames": _NAME,
        "additionalProperties": {
            "type": "object",
            "minProperties": min_inner,
            "propertyNames": _NAME,
            "additionalProperties": inner,
        },
    }


_FILE_TEXT = {"type": "string", "maxLength": 1_000_000}

SCHEMAS: dict[str, dict[str, Any]] = {
    "qi": _table(_CLASSIFICATION),
    "cw": _table(_WEIGHT),
    "wmp": _table(_WEIGHT, min_inner=0),
    "wmm": _table(_WEIGHT, min_inner=0),
    "method": _table({"type": "number"}),
    "qos": {
        "type": "object",
        "properties": {
            "purposes": {"type": "array", "items": _NAME, "minItems": 1, "uniqueItems": True},
        },
        "required": ["purposes"],
        "additionalProperties": False,
    },
    "audit": {
        "type": "object",
        "properties": {
            "pm_files": {
                "type": "object",
                "properties": {k: _FILE_TEXT for k in ("qi", "cw", "wmp", "wmm")},
                "required": ["qi", "cw", "wmp", "wmm"],
                "additionalProperties": False,
            },
            "ds_files": {
                "type": "object",
                "properties": {"method": _FILE_TEXT},
                "required": ["method"],
                "additionalProperties": False,
            },
        },
        "required": ["pm_files", "ds_files"],
        "additionalProperties": False,
    },
}

ENVELOPE = {
    "type": "object",
    "properties": {"command": {"enum": list(COMMANDS)}, "args": {}},
    "required": ["command", "args"],
    "additionalProperties": False,
}

# the file each command reads, for messages and the CLI defaults
FILE_NAMES = {
    "qi": "qi.txt",
    "cw": "weights.txt",
    "wmp": "WM_plus.txt",
    "wmm": "WM_minus.txt",
    "method": "inputs.txt",
    "qos": "compute.txt",
}


class SchemaError(ValueError):
    pass


def _first_error(schema: dict, doc: Any) -> str | None:
    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(doc), key=lambda e: (list(e.absolute_path), e.message))
    if not errors:
        return None
    err = errors[0]
    where = "/".join(str(p) for p in err.absolute_path) or "<root>"
    return f"field {where}: {err.message}"


def validate_args(command: str, args: Any):
    if command not in SCHEMAS:
        raise SchemaError(f"unknown command {command!r}")
    problem = _first_error(SCHEMAS[command], args)
    if problem:
        raise SchemaError(f"{command}: {problem}")


def _no_duplicates(pairs):
    out = {}
    for k, v in pairs:
        if k in out:
            raise SchemaError(f"duplicate key {k!r}")
        out[k] = v
    return out


def _reject_constant(token):
    raise SchemaError(f"non-finite number {token}")


def parse_document(command: str, text: str) -> Any:
    """Parse a file's text for ``command`` with line/field diagnostics."""
    try:
        doc = json.loads(text, object_pairs_hook=_no_duplicates, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    validate_args(command, doc)
    return doc


def encode_payload(command: str, args: Any) -> bytes:
    validate_args(command, args)
    return canonical.encode({"command": command, "args": args})


def decode_payload(payload: bytes) -> tuple[str, Any]:
    if not canonical.is_canonical(payload):
        raise SchemaError("payload is not canonical JSON")
    doc = canonical.decode(payload)
    problem = _first_error(ENVELOPE, doc)
    if problem:
        raise SchemaError(problem)
    validate_args(doc["command"], doc["args"])
    return doc["command"], doc["args"]
