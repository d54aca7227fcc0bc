"""On-disk persistence: an append-only block log plus a state snapshot.

``blocks.jsonl`` holds one canonical-JSON record per committed block together
with its commit certificate. ``state.json`` is a convenience snapshot of the
state at some height; it can always be rebuilt by replaying the log.
"""

from __future__ import annotations

import os
from pathlib import Path
from typing import Any

from .. import canonical
from .chain import Block
from .state import LedgerState


class StoreError(RuntimeError):
    pass


class BlockStore:
    def __init__(self, directory: str | os.PathLike):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self.log_path = self.directory / "blocks.jsonl"
        self.snapshot_path = self.directory / "state.json"

    def append(self, block: Block, certificate: list[dict[str, Any]] | None = None):
        record = {"block": block.to_json(), "certificate": certificate or []}
        with open(self.log_path, "a", encoding="utf-8") as fh:
            fh.write(canonical.dumps(record) + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    def load(self) -> list[tuple[Block, list[dict[str, Any]]]]:
        if not self.log_path.exists():
            return []
        out = []
        with open(self.log_path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    record = canonical.decode(line)
                    block = Block.from_json(record["block"])
                except (ValueError, KeyError) as exc:
                    raise StoreError(f"{self.log_path}:{lineno}: {exc}") from None
                if block.height != len(out):
                    raise StoreError(f"{self.log_path}:{lineno}: expected height {len(out)}, got {block.height}")
                if out and block.previous_block_id != out[-1][0].id:
                    raise StoreError(f"{self.log_path}:{lineno}: broken chain link")
                out.append((block, record.get("certificate", [])))
        return out

    def save_snapshot(self, state: LedgerState, height: int, block_id: str):
        doc = {"height": height, "block_id": block_id, "state_root": state.root, "entries": state.to_json()}
        tmp = self.snapshot_path.with_suffix(".tmp")
        tmp.write_text(canonical.dumps(doc), encoding="utf-8")
        os.replace(tmp, self.snapshot_path)

    def load_snapshot(self) -> tuple[LedgerState, int, str] | None:
        if not self.snapshot_path.exists():
            return None
        doc = canonical.decode(self.snapshot_path.read_text(encoding="utf-8"))
        state = LedgerState.from_json(doc["entries"])
        if state.root != doc["state_root"]:
            raise StoreError("snapshot state root does not match its entries")
        return state, doc["height"], doc["block_id"]
