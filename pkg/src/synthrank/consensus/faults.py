"""Byzantine behaviours as wrappers over an honest node.

A wrapper forwards inputs to the inner node and rewrites what it sends.
"""

from __future__ import annotations

from dataclasses import replace
from typing import Any

from ..ledger.chain import Block, make_block
from ..processor.handler import execute_batches
from .messages import COMMIT, PRE_PREPARE, PREPARE, Message
from .node import Node, Outbound


class FaultyNode:
    kind = "honest"

    def __init__(self, inner: Node, start: float = 0.0):
        self.inner = inner
        self.start = start

    def __getattr__(self, name):
        return getattr(self.inner, name)

    def submit(self, batch, now):
        return self.inner.submit(batch, now)

    def on_message(self, msg, now):
        self.inner.on_message(msg, now)

    def on_tick(self, now):
        self.inner.on_tick(now)

    def active(self) -> bool:
        return self.inner.now >= self.start

    def drain(self) -> list[Outbound]:
        out = self.inner.drain()
        return self.rewrite(out) if self.active() else out

    def rewrite(self, out: list[Outbound]) -> list[Outbound]:
        return out


class MuteNode(FaultyNode):
    """Sends nothing at all."""

    kind = "mute"

    def rewrite(self, out):
        return []


class DelayedNode(FaultyNode):
    """Every outbound message leaves ``delay`` simulated ms late."""

    kind = "delayed"

    def __init__(self, inner: Node, start: float = 0.0, delay: float = 300.0):
        super().__init__(inner, start)
        self.delay = delay

    def rewrite(self, out):
        return [replace(o, extra_delay=o.extra_delay + self.delay) for o in out]


def _corrupt(signature: str) -> str:
    if not signature:
        return "00"
    last = "1" if signature[-1] != "1" else "2"
    return signature[:-1] + last


class SignatureCorruptingNode(FaultyNode):
    """Flips one hex digit of every signature it sends."""

    kind = "corrupt-signatures"

    def rewrite(self, out):
        return [replace(o, message=replace(o.message, signature=_corrupt(o.message.signature))) for o in out]


class EquivocatingNode(FaultyNode):
    """As primary, sends one block to some peers and a conflicting block to
    the rest. It never votes, so neither block can gather a quorum through it."""

    kind = "equivocate"

    def rewrite(self, out):
        result = []
        for o in out:
            kind = o.message.kind
            if kind in (PREPARE, COMMIT):
                continue
            if kind == PRE_PREPARE and o.dest is None:
                result.extend(self._split(o.message))
                continue
            result.append(o)
        return result

    def _variant(self, msg: Message) -> Message:
        block = Block.from_json(msg.body["block"])
        inner = self.inner
        batches = block.batches[1:]
        state, _ = execute_batches(inner.state, batches, inner.roles, block.height)
        other = make_block(inner.keypair, block.height, block.previous_block_id, batches, state.root)
        body: dict[str, Any] = {"block": other.to_json()}
        return Message(PRE_PREPARE, msg.view, msg.seq, inner.id, other.id, body).signed(inner.keypair)

    def _split(self, msg: Message) -> list[Outbound]:
        peers = [i for i in range(self.inner.params.n) if i != self.inner.id]
        alt = self._variant(msg)
        half = len(peers) // 2
        return [Outbound(p, msg if i < half else alt) for i, p in enumerate(peers)]


FAULTS = {
    cls.kind: cls for cls in (MuteNode, DelayedNode, SignatureCorruptingNode, EquivocatingNode)
}


def wrap(node: Node, spec: dict[str, Any] | None):
    if not spec:
        return node
    spec = dict(spec)
    kind = spec.pop("kind")
    try:
        cls = FAULTS[kind]
    except KeyError:
        raise ValueError(f"unknown fault {kind!r}; known: {sorted(FAULTS)}") from None
    return cls(node, **spec)
