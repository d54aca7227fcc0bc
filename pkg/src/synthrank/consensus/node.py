"""An honest validator running simplified PBFT.

The node is a deterministic state machine. The simulation feeds it messages
and clock ticks; it queues outbound messages that the simulation drains.
Sequence numbers equal block heights and at most one block is in flight.
"""

from __future__ import annotations

import logging
from collections import OrderedDict, defaultdict
from dataclasses import dataclass
from typing import Any

from ..ledger.chain import Batch, Block, make_block, role_registry
from ..ledger.crypto import KeyPair
from ..ledger.state import LedgerState
from ..ledger.store import BlockStore
from ..processor.handler import BatchResult, execute_batches
from .messages import (
    BATCH,
    COMMIT,
    FETCH_REQUEST,
    FETCH_RESPONSE,
    NEW_VIEW,
    PRE_PREPARE,
    PREPARE,
    STATUS,
    VIEW_CHANGE,
    Message,
    count_valid,
)

log = logging.getLogger(__name__)

FETCH_LIMIT = 16


@dataclass(frozen=True)
class Outbound:
    dest: int | None  # None = every other validator
    message: Message
    extra_delay: float = 0.0


@dataclass(frozen=True)
class NodeParams:
    n: int
    f: int
    view_timeout: float
    max_batches_per_block: int = 1

    @property
    def quorum(self) -> int:
        return 2 * self.f + 1


@dataclass
class Executed:
    state: LedgerState
    results: list[BatchResult]


class Node:
    def __init__(
        self,
        node_id: int,
        keypair: KeyPair,
        params: NodeParams,
        genesis: Block,
        store: BlockStore | None = None,
    ):
        self.id = node_id
        self.keypair = keypair
        self.params = params
        settings = genesis.settings or {}
        self.keys: list[str] = list(settings["validators"])
        if self.keys[node_id] != keypair.public_key:
            raise ValueError(f"node {node_id} key does not match genesis")
        self.roles = role_registry(settings)
        self.store = store

        self.chain: list[Block] = [genesis]
        self.certificates: dict[int, list[dict[str, Any]]] = {0: []}
        self.state = LedgerState()
        self.roots: list[str] = [genesis.state_root]
        self.batch_status: dict[str, tuple] = {}
        self.pending: OrderedDict[str, Batch] = OrderedDict()

        self.view = 0
        self.in_view_change = False
        self.vc_target = 0
        self.vc_attempts = 0
        self.vc_started = 0.0
        self.last_progress = 0.0

        self._reset_slot()
        self.prepared_cert: dict[str, Any] | None = None
        self.vc_msgs: dict[int, dict[int, Message]] = defaultdict(dict)
        self.own_vc: Message | None = None
        self.new_view_sent: dict[int, Message] = {}
        self.required: dict[int, tuple[int, str, dict] | None] = {}
        self.exec_cache: dict[str, Executed] = {}
        self.peer_status: dict[int, tuple[int, int]] = {}
        self.future_commits: dict[int, dict[str, dict[int, Message]]] = defaultdict(lambda: defaultdict(dict))

        self.commit_log: list[dict[str, Any]] = []
        self.rejected_messages = 0
        self.outbox: list[Outbound] = []
        self.now = 0.0
        self._ticks = 0

        if store is not None:
            self._restore(store)

    # ---- helpers -------------------------------------------------------

    @property
    def height(self) -> int:
        return len(self.chain) - 1

    @property
    def head(self) -> Block:
        return self.chain[-1]

    def primary(self, view: int | None = None) -> int:
        return (self.view if view is None else view) % self.params.n

    @property
    def is_primary(self) -> bool:
        return self.primary() == self.id

    def _reset_slot(self):
        self.accepted: dict[int, tuple[Block, Message]] = {}
        self.prepares: dict[tuple[int, str], dict[int, Message]] = defaultdict(dict)
        self.sent_prepare: dict[int, Message] = {}
        self.sent_commit: Message | None = None

    def _msg(self, kind, view, seq, digest="", body=None) -> Message:
        return Message(kind, view, seq, self.id, digest, body).signed(self.keypair)

    def _send(self, message: Message, dest: int | None = None):
        self.outbox.append(Outbound(dest, message))

    def drain(self) -> list[Outbound]:
        out, self.outbox = self.outbox, []
        return out

    def timeout(self) -> float:
        return self.params.view_timeout * (2 ** min(self.vc_attempts, 6))

    def status(self, batch_id: str) -> tuple:
        if batch_id in self.batch_status:
            return self.batch_status[batch_id]
        if batch_id in self.pending:
            return ("pending",)
        return ("unknown",)

    # ---- client entry ----------------------------------------------------

    def submit(self, batch: Batch, now: float) -> tuple[bool, str]:
        self.now = now
        problems = batch.problems()
        if problems:
            return False, problems[0]
        self._add_pending(batch)
        self._send(self._msg(BATCH, self.view, 0, batch.id, {"batch": batch.to_json()}))
        self._maybe_propose()
        return True, ""

    def _add_pending(self, batch: Batch):
        if batch.id in self.batch_status or batch.id in self.pending:
            return
        if not self.pending:
            self.last_progress = self.now
        self.pending[batch.id] = batch

    # ---- message dispatch -----------------------------------------------

    def on_message(self, msg: Message, now: float):
        self.now = now
        if not (0 <= msg.sender < self.params.n) or msg.sender == self.id or not msg.verify(self.keys[msg.sender]):
            self.rejected_messages += 1
            return
        handler = {
            PRE_PREPARE: self._on_pre_prepare,
            PREPARE: self._on_prepare,
            COMMIT: self._on_commit,
            VIEW_CHANGE: self._on_view_change,
            NEW_VIEW: self._on_new_view,
            BATCH: self._on_batch,
            STATUS: self._on_status,
            FETCH_REQUEST: self._on_fetch_request,
            FETCH_RESPONSE: self._on_fetch_response,
        }.get(msg.kind)
        if handler is None:
            self.rejected_messages += 1
            return
        try:
            handler(msg)
        except (KeyError, TypeError, ValueError) as exc:
            log.debug("node %d dropped malformed %s: %s", self.id, msg.kind, exc)
            self.rejected_messages += 1

    def _on_batch(self, msg: Message):
        batch = Batch.from_json(msg.body["batch"])
        if batch.id != msg.digest or batch.problems():
            self.rejected_messages += 1
            return
        self._add_pending(batch)
        self._maybe_propose()

    # ---- normal case -----------------------------------------------------

    def _execute(self, block: Block) -> Executed | None:
        cached = self.exec_cache.get(block.id)
        if cached is not None:
            return cached
        if block.previous_block_id != self.head.id or block.height != self.height + 1:
            return None
        if block.problems():
            return None
        if any(b.id in self.batch_status for b in block.batches):
            return None
        state, results = execute_batches(self.state, block.batches, self.roles, block.height)
        if state.root != block.state_root:
            return None
        ex = Executed(state, results)
        self.exec_cache[block.id] = ex
        return ex

    def _maybe_propose(self):
        if not self.is_primary or self.in_view_change:
            return
        seq = self.height + 1
        if self.view in self.accepted:
            return
        req = self.required.get(self.view)
        if req is not None and req[0] == seq:
            block = Block.from_json(req[2])
        else:
            candidates = [b for b in self.pending.values() if b.id not in self.batch_status]
            if not candidates:
                return
            batches = candidates[: self.params.max_batches_per_block]
            state, results = execute_batches(self.state, batches, self.roles, seq)
            block = make_block(self.keypair, seq, self.head.id, batches, state.root)
            self.exec_cache[block.id] = Executed(state, results)
        if self._execute(block) is None:
            return
        pp = self._msg(PRE_PREPARE, self.view, seq, block.id, {"block": block.to_json()})
        self._accept(block, pp)
        self._send(pp)

    def _accept(self, block: Block, pp: Message):
        self.accepted[pp.view] = (block, pp)
        for b in block.batches:
            if b.id not in self.batch_status:
                self.pending.setdefault(b.id, b)
        prep = self._msg(PREPARE, pp.view, pp.seq, block.id)
        self.sent_prepare[pp.view] = prep
        self.prepares[(pp.view, block.id)][self.id] = prep
        self._send(prep)
        self._check_slot()

    def _on_pre_prepare(self, msg: Message):
        seq = self.height + 1
        if msg.view != self.view or self.in_view_change or msg.sender != self.primary(msg.view):
            return
        if msg.seq != seq:
            return
        if msg.view in self.accepted:
            if self.accepted[msg.view][0].id == msg.digest:
                self._send(self.sent_prepare[msg.view], msg.sender)
            return
        block = Block.from_json(msg.body["block"])
        if block.id != msg.digest or block.header.get("signer_public_key") not in self.keys:
            return
        req = self.required.get(msg.view)
        if req is not None and req[0] == seq and req[1] != block.id:
            return
        if self._execute(block) is None:
            return
        self._accept(block, msg)

    def _on_prepare(self, msg: Message):
        if msg.seq != self.height + 1:
            return
        self.prepares[(msg.view, msg.digest)][msg.sender] = msg
        self._check_slot()

    def _on_commit(self, msg: Message):
        if msg.seq <= self.height:
            return
        self.future_commits[msg.seq][msg.digest][msg.sender] = msg
        self._check_slot()

    def _check_slot(self):
        seq = self.height + 1
        acc = self.accepted.get(self.view)
        if acc is not None and self.sent_commit is None and not self.in_view_change:
            block, pp = acc
            votes = self.prepares[(self.view, block.id)]
            if len(votes) >= self.params.quorum:
                self.prepared_cert = {
                    "view": self.view,
                    "seq": seq,
                    "digest": block.id,
                    "block": block.to_json(),
                    "prepares": [m.to_json() for _, m in sorted(votes.items())],
                }
                c = self._msg(COMMIT, self.view, seq, block.id)
                self.sent_commit = c
                self.future_commits[seq][block.id][self.id] = c
                self._send(c)
        for digest, votes in sorted(self.future_commits.get(seq, {}).items()):
            if len(votes) < self.params.quorum:
                continue
            block = self._known_block(digest)
            if block is None:
                # certificate without the block: ask a committer for it
                self._request_blocks(min(s for s in votes if s != self.id))
                return
            cert = [m.to_json() for _, m in sorted(votes.items())]
            self._commit(block, cert, max(m.view for m in votes.values()))
            return

    def _known_block(self, digest: str) -> Block | None:
        for block, _ in self.accepted.values():
            if block.id == digest:
                return block
        if self.prepared_cert and self.prepared_cert["digest"] == digest:
            return Block.from_json(self.prepared_cert["block"])
        for req in self.required.values():
            if req is not None and req[1] == digest:
                return Block.from_json(req[2])
        return None

    def _commit(self, block: Block, cert: list[dict[str, Any]], view: int) -> bool:
        ex = self._execute(block)
        if ex is None:
            log.warning("node %d could not execute certified block %s", self.id, block.id[:12])
            return False
        self.state = ex.state
        self.chain.append(block)
        self.roots.append(ex.state.root)
        self.certificates[block.height] = cert
        for r in ex.results:
            self.batch_status[r.batch_id] = ("committed", block.height) if r.valid else ("invalid", r.reason)
            self.pending.pop(r.batch_id, None)
        if self.store is not None:
            self.store.append(block, cert)
            self.store.save_snapshot(self.state, block.height, block.id)
        self.commit_log.append(
            {"height": block.height, "block_id": block.id, "state_root": ex.state.root, "time": self.now, "view": view}
        )
        self.exec_cache = {}
        self.future_commits.pop(block.height, None)
        self._reset_slot()
        if self.prepared_cert and self.prepared_cert["seq"] <= block.height:
            self.prepared_cert = None
        self.last_progress = self.now
        self.vc_attempts = 0
        if view > self.view or (self.in_view_change and view == self.view):
            # the network committed in a view we have not installed, or moved on
            # while this node was alone in asking for a view change
            self.view = view
            self.in_view_change = False
            self.vc_target = view
        self._maybe_propose()
        self._check_slot()
        return True

    # ---- view change -------------------------------------------------------

    def _start_view_change(self, target: int):
        self.in_view_change = True
        self.vc_target = target
        self.vc_started = self.now
        self.vc_attempts += 1
        cert = self.prepared_cert if self.prepared_cert and self.prepared_cert["seq"] == self.height + 1 else None
        vc = self._msg(VIEW_CHANGE, target, self.height + 1, "", {"height": self.height, "prepared": cert})
        self.own_vc = vc
        self.vc_msgs[target][self.id] = vc
        self._send(vc)
        self._maybe_new_view(target)

    def _valid_cert(self, cert: dict[str, Any] | None) -> bool:
        if cert is None:
            return True
        block = Block.from_json(cert["block"])
        if block.id != cert["digest"] or block.height != cert["seq"]:
            return False
        n = count_valid(cert["prepares"], PREPARE, cert["seq"], cert["digest"], self.keys, view=cert["view"])
        return n >= self.params.quorum

    def _on_view_change(self, msg: Message):
        current = self.vc_target if self.in_view_change else self.view
        if msg.view <= self.view:
            if self.primary() == self.id and self.view in self.new_view_sent and msg.view == self.view:
                self._send(self.new_view_sent[self.view], msg.sender)
            return
        if not self._valid_cert(msg.body.get("prepared")):
            self.rejected_messages += 1
            return
        self.vc_msgs[msg.view][msg.sender] = msg
        # join once f+1 validators ask for a view beyond ours
        higher: dict[int, int] = {}
        for v, senders in self.vc_msgs.items():
            if v > current:
                for s in senders:
                    if s != self.id:
                        higher[s] = min(higher.get(s, v), v)
        if len(higher) >= self.params.f + 1:
            self._start_view_change(min(higher.values()))
        self._maybe_new_view(msg.view)

    def _maybe_new_view(self, view: int):
        if self.primary(view) != self.id or view in self.new_view_sent:
            return
        if not self.in_view_change or self.vc_target != view:
            return
        vcs = self.vc_msgs.get(view, {})
        if len(vcs) < self.params.quorum:
            return
        chosen = [m.to_json() for _, m in sorted(vcs.items())]
        nv = self._msg(NEW_VIEW, view, 0, "", {"view_changes": chosen})
        self.new_view_sent[view] = nv
        self._send(nv)
        self._install_view(view, [Message.from_json(m) for m in chosen])

    def _on_new_view(self, msg: Message):
        if msg.sender != self.primary(msg.view):
            return
        if msg.view < self.view or (msg.view == self.view and not self.in_view_change):
            return
        vcs = []
        senders = set()
        for raw in msg.body["view_changes"]:
            m = Message.from_json(raw)
            if m.kind != VIEW_CHANGE or m.view != msg.view or m.sender in senders:
                continue
            if not (0 <= m.sender < self.params.n) or not m.verify(self.keys[m.sender]):
                continue
            if not self._valid_cert(m.body.get("prepared")):
                continue
            senders.add(m.sender)
            vcs.append(m)
        if len(vcs) < self.params.quorum:
            self.rejected_messages += 1
            return
        self._install_view(msg.view, vcs)

    def _install_view(self, view: int, vcs: list[Message]):
        top = max(m.body["height"] for m in vcs)
        certs = [m.body["prepared"] for m in vcs if m.body.get("prepared") and m.body["prepared"]["seq"] == top + 1]
        if certs:
            best = max(certs, key=lambda c: (c["view"], c["digest"]))
            self.required[view] = (best["seq"], best["digest"], best["block"])
        else:
            self.required[view] = None
        self.view = view
        self.in_view_change = False
        self.vc_target = view
        self.last_progress = self.now
        self._reset_slot()
        for v in [v for v in self.vc_msgs if v <= view]:
            del self.vc_msgs[v]
        if top > self.height:
            ahead = [m.sender for m in vcs if m.body["height"] == top and m.sender != self.id]
            if ahead:
                self._request_blocks(min(ahead))
        self._maybe_propose()

    # ---- catch-up ----------------------------------------------------------

    def _request_blocks(self, peer: int):
        self._send(self._msg(FETCH_REQUEST, self.view, self.height + 1), peer)

    def _on_fetch_request(self, msg: Message):
        start = msg.seq
        records = [
            {"block": self.chain[h].to_json(), "certificate": self.certificates[h]}
            for h in range(start, min(self.height, start + FETCH_LIMIT - 1) + 1)
        ]
        if records:
            self._send(self._msg(FETCH_RESPONSE, self.view, start, "", {"blocks": records}), msg.sender)

    def _on_fetch_response(self, msg: Message):
        for rec in msg.body["blocks"]:
            block = Block.from_json(rec["block"])
            if block.height != self.height + 1:
                continue
            cert = rec["certificate"]
            if count_valid(cert, COMMIT, block.height, block.id, self.keys) < self.params.quorum:
                self.rejected_messages += 1
                return
            view = max(Message.from_json(m).view for m in cert)
            if not self._commit(block, cert, view):
                return

    def _on_status(self, msg: Message):
        self.peer_status[msg.sender] = (msg.body["height"], msg.view)
        if msg.view < self.view and self.primary() == self.id and self.view in self.new_view_sent:
            self._send(self.new_view_sent[self.view], msg.sender)

    # ---- clock -----------------------------------------------------------------

    def on_tick(self, now: float):
        self.now = now
        seq = self.height + 1
        self._send(self._msg(STATUS, self.view, seq, self.head.id, {"height": self.height}))
        # retransmit whatever this node last said about the open slot
        if self.in_view_change and self.own_vc is not None:
            self._send(self.own_vc)
        else:
            acc = self.accepted.get(self.view)
            if acc is not None:
                if self.is_primary:
                    self._send(acc[1])
                self._send(self.sent_prepare[self.view])
            if self.sent_commit is not None:
                self._send(self.sent_commit)
            if self.is_primary and self.view in self.new_view_sent:
                behind = [s for s, (_, v) in self.peer_status.items() if v < self.view]
                for s in behind:
                    self._send(self.new_view_sent[self.view], s)
        for batch in list(self.pending.values())[:8]:
            self._send(self._msg(BATCH, self.view, 0, batch.id, {"batch": batch.to_json()}))

        ahead = sorted(s for s, (h, _) in self.peer_status.items() if h > self.height)
        if ahead:
            # rotate so a peer that lies about its height cannot starve us
            self._ticks += 1
            self._request_blocks(ahead[self._ticks % len(ahead)])

        busy = bool(self.pending) or bool(self.accepted)
        if self.in_view_change:
            if now - self.vc_started > self.timeout():
                self._start_view_change(self.vc_target + 1)
        elif busy and now - self.last_progress > self.timeout():
            self._start_view_change(self.view + 1)
        else:
            self._maybe_propose()

    # ---- persistence ---------------------------------------------------------------

    def _restore(self, store: BlockStore):
        records = store.load()
        if not records:
            store.append(self.chain[0], [])
            return
        if records[0][0].id != self.chain[0].id:
            raise ValueError("stored genesis differs from configured genesis")
        for block, cert in records[1:]:
            view = max((Message.from_json(m).view for m in cert), default=0)
            saved, self.store = self.store, None
            ok = self._commit(block, cert, view)
            self.store = saved
            if not ok:
                raise ValueError(f"stored block {block.height} does not replay")
            self.view = max(self.view, view)
