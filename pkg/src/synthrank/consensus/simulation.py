"""Deterministic discrete-event network of validators.

All randomness (link delays, drops) comes from one seeded generator and
events are ordered by (time, insertion counter), so a run is a pure function
of its configuration and workload.
"""

from __future__ import annotations

import heapq
import random
from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

from .. import canonical
from ..ledger.chain import Batch, Role, make_genesis
from ..ledger.crypto import KeyPair
from ..ledger.state import EMPTY_ROOT
from ..ledger.store import BlockStore
from .faults import wrap
from .messages import Message
from .node import Node, NodeParams, Outbound

TERMINAL = ("committed", "invalid")


class ConfigError(ValueError):
    pass


@dataclass
class NetworkConfig:
    n: int = 4
    f: int = 1
    seed: int = 0
    view_timeout: float = 400.0
    tick_interval: float = 40.0
    delay_min: float = 2.0
    delay_max: float = 12.0
    drop_rate: float = 0.0
    links: dict[str, dict[str, float]] = field(default_factory=dict)
    max_batches_per_block: int = 1
    roles: dict[str, str] = field(default_factory=dict)
    faults: dict[str, dict[str, Any]] = field(default_factory=dict)
    keys: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.f < 0 or self.n < 3 * self.f + 1:
            raise ConfigError(f"n={self.n} violates n >= 3f+1 for f={self.f}")
        if self.n < 1:
            raise ConfigError("need at least one validator")
        if not 0 <= self.drop_rate < 1:
            raise ConfigError("drop_rate must be in [0, 1)")
        if self.delay_min < 0 or self.delay_max < self.delay_min:
            raise ConfigError("invalid delay range")
        for r in self.roles.values():
            Role(r)
        derived = [k.public_key for k in self.validator_keypairs()]
        if self.keys and list(self.keys) != derived:
            raise ConfigError("validator keys do not match the seed")
        self.keys = derived

    def validator_keypairs(self) -> list[KeyPair]:
        return [KeyPair.derive("validator", self.seed, i) for i in range(self.n)]

    def genesis_settings(self) -> dict[str, Any]:
        return {
            "family": "synthrank",
            "validators": list(self.keys),
            "f": self.f,
            "roles": dict(sorted(self.roles.items())),
        }

    def link(self, src: int, dst: int) -> tuple[float, float, float]:
        o = self.links.get(f"{src}-{dst}", {})
        return (
            o.get("delay_min", self.delay_min),
            o.get("delay_max", self.delay_max),
            o.get("drop_rate", self.drop_rate),
        )

    def fault(self, node_id: int) -> dict[str, Any] | None:
        return self.faults.get(str(node_id))

    @property
    def byzantine(self) -> set[int]:
        return {int(k) for k in self.faults}

    def to_json(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> NetworkConfig:
        return cls(**dict(data))

    def save(self, path: str | Path):
        Path(path).write_text(canonical.dumps(self.to_json()) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> NetworkConfig:
        return cls.from_json(canonical.decode(Path(path).read_text(encoding="utf-8")))


@dataclass(frozen=True)
class WorkloadItem:
    at: float
    node: int
    batch: Batch


class Network:
    def __init__(self, config: NetworkConfig, data_dir: str | Path | None = None, record_messages: bool = True):
        self.config = config
        self.rng = random.Random(config.seed)
        self.now = 0.0
        self._queue: list[tuple[float, int, str, Any]] = []
        self._counter = 0
        self.genesis = make_genesis(config.genesis_settings(), EMPTY_ROOT)
        params = NodeParams(config.n, config.f, config.view_timeout, config.max_batches_per_block)
        self.nodes = []
        for i, kp in enumerate(config.validator_keypairs()):
            store = BlockStore(Path(data_dir) / f"node{i}") if data_dir is not None else None
            self.nodes.append(wrap(Node(i, kp, params, self.genesis, store), config.fault(i)))
        self.honest = [i for i in range(config.n) if i not in config.byzantine]
        self.record_messages = record_messages
        self.message_log: list[dict[str, Any]] = []
        self.submissions: list[dict[str, Any]] = []
        for i in range(config.n):
            self._push(config.tick_interval * (1 + i / config.n), "tick", i)

    # ---- scheduling ------------------------------------------------------------

    def _push(self, at: float, kind: str, payload: Any):
        self._counter += 1
        heapq.heappush(self._queue, (at, self._counter, kind, payload))

    def _route(self, src: int, out: Iterable[Outbound]):
        for o in out:
            dests = range(self.config.n) if o.dest is None else (o.dest,)
            for dst in dests:
                if dst == src:
                    continue
                lo, hi, drop = self.config.link(src, dst)
                delay = self.rng.uniform(lo, hi) + o.extra_delay
                dropped = self.rng.random() < drop
                if self.record_messages:
                    m = o.message
                    self.message_log.append(
                        {"time": round(self.now, 6), "src": src, "dst": dst, "kind": m.kind,
                         "view": m.view, "seq": m.seq, "dropped": dropped}
                    )
                if not dropped:
                    self._push(self.now + delay, "deliver", (dst, o.message))

    def _flush(self, node_id: int):
        self._route(node_id, self.nodes[node_id].drain())

    def step(self) -> bool:
        if not self._queue:
            return False
        at, _, kind, payload = heapq.heappop(self._queue)
        self.now = at
        if kind == "tick":
            node_id = payload
            self.nodes[node_id].on_tick(at)
            self._flush(node_id)
            self._push(at + self.config.tick_interval, "tick", node_id)
        elif kind == "deliver":
            dst, msg = payload
            self.nodes[dst].on_message(msg, at)
            self._flush(dst)
        elif kind == "submit":
            node_id, batch = payload
            self._submit_now(node_id, batch)
        return True

    def run_until(self, t: float):
        while self._queue and self._queue[0][0] <= t:
            self.step()
        self.now = max(self.now, t)

    def run_while(self, busy: Callable[[], bool], max_time: float) -> bool:
        """Advance until ``busy()`` is false; returns False on hitting ``max_time``."""
        while busy():
            if not self._queue or self._queue[0][0] > max_time:
                return False
            self.step()
        return True

    # ---- client side -------------------------------------------------------------

    def _submit_now(self, node_id: int, batch: Batch) -> tuple[bool, str]:
        ok, reason = self.nodes[node_id].submit(batch, self.now)
        self.submissions.append({"time": round(self.now, 6), "node": node_id, "batch_id": batch.id, "accepted": ok})
        self._flush(node_id)
        return ok, reason

    def submit(self, node_id: int, batch: Batch, at: float | None = None) -> tuple[bool, str] | None:
        if at is None or at <= self.now:
            return self._submit_now(node_id, batch)
        self._push(at, "submit", (node_id, batch))
        return None

    def status(self, node_id: int, batch_id: str) -> tuple:
        return self.nodes[node_id].status(batch_id)

    def settled(self, batch_ids: Sequence[str], nodes: Sequence[int] | None = None) -> bool:
        nodes = self.honest if nodes is None else nodes
        for i in nodes:
            for b in batch_ids:
                if self.nodes[i].status(b)[0] not in TERMINAL:
                    return False
        heights = {self.nodes[i].height for i in nodes}
        return len(heights) == 1

    def tamper_state(self, address: str, payload: bytes, nodes: Sequence[int] | None = None):
        """Overwrite committed state out of band, as an attacker with disk access would.

        Call it once the targeted nodes share a height; a node that is still
        catching up will refuse the next certified block over altered state.
        """
        for i in self.honest if nodes is None else nodes:
            node = self.nodes[i]
            state = node.state.snapshot()
            state.set(address, payload)
            node.state = state

    # ---- results -----------------------------------------------------------------------

    def trace(self) -> Trace:
        return Trace(
            config=self.config.to_json(),
            honest=list(self.honest),
            commits={i: list(self.nodes[i].commit_log) for i in range(self.config.n)},
            roots={i: list(self.nodes[i].roots) for i in range(self.config.n)},
            views={i: self.nodes[i].view for i in range(self.config.n)},
            rejected={i: self.nodes[i].rejected_messages for i in range(self.config.n)},
            submissions=list(self.submissions),
            messages=list(self.message_log),
            end_time=round(self.now, 6),
        )


@dataclass
class Trace:
    config: dict[str, Any]
    honest: list[int]
    commits: dict[int, list[dict[str, Any]]]
    roots: dict[int, list[str]]
    views: dict[int, int]
    rejected: dict[int, int]
    submissions: list[dict[str, Any]]
    messages: list[dict[str, Any]]
    end_time: float
    completed: bool = True

    def conflicts(self) -> list[tuple[int, dict[int, str]]]:
        """Heights at which two honest nodes committed different blocks."""
        by_height: dict[int, dict[int, str]] = {}
        for i in self.honest:
            for c in self.commits[i]:
                by_height.setdefault(c["height"], {})[i] = c["block_id"]
        return [(h, ids) for h, ids in sorted(by_height.items()) if len(set(ids.values())) > 1]

    def final_roots(self) -> dict[int, str]:
        return {i: self.roots[i][-1] for i in self.honest}

    def heights(self) -> dict[int, int]:
        return {i: len(self.roots[i]) - 1 for i in self.config_nodes()}

    def config_nodes(self) -> list[int]:
        return sorted(self.roots)

    def to_jsonl(self) -> str:
        lines = [{"record": "config", **self.config}]
        lines.append({"record": "summary", "honest": self.honest, "views": self.views, "rejected": self.rejected,
                      "end_time": self.end_time, "completed": self.completed})
        for s in self.submissions:
            lines.append({"record": "submit", **s})
        for i in sorted(self.commits):
            for c in self.commits[i]:
                lines.append({"record": "commit", "node": i, **c})
        for m in self.messages:
            lines.append({"record": "message", **m})
        return "".join(canonical.dumps(_json_keys(x)) + "\n" for x in lines)


def _json_keys(obj):
    if isinstance(obj, dict):
        return {str(k): _json_keys(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_json_keys(v) for v in obj]
    return obj


def run_simulation(
    config: NetworkConfig,
    workload: Sequence[Batch | WorkloadItem],
    fault_script: Mapping[str, Mapping[str, Any]] | None = None,
    *,
    submit_interval: float = 5.0,
    max_time: float = 60_000.0,
) -> Trace:
    """Run a workload to completion and return the trace.

    Plain batches are submitted to honest nodes round-robin, one every
    ``submit_interval`` ms. ``fault_script`` overrides ``config.faults``.
    """
    if fault_script is not None:
        config = NetworkConfig.from_json({**config.to_json(), "faults": dict(fault_script)})
    net = Network(config)
    items = []
    for k, w in enumerate(workload):
        if isinstance(w, WorkloadItem):
            items.append(w)
        else:
            items.append(WorkloadItem(k * submit_interval, net.honest[k % len(net.honest)], w))
    for it in items:
        net.submit(it.node, it.batch, at=it.at)
    ids = [it.batch.id for it in items]
    last = max((it.at for it in items), default=0.0)
    done = net.run_while(lambda: net.now < last or not net.settled(ids), max_time)
    tr = net.trace()
    tr.completed = done
    return tr
