"""A simulated deployment driven through the command-line client.

Registration files are written to a working directory and submitted with
``synthrank.client.main`` over an in-process transport, so scenarios exercise
the same path a user at a terminal would.
"""

from __future__ import annotations

import io
import tempfile
from pathlib import Path
from typing import Any

from .. import canonical
from ..client import Client, LocalTransport, main as cli_main
from ..consensus.simulation import Network, NetworkConfig
from ..ledger.chain import Role
from ..ledger.crypto import KeyPair, write_keypair
from ..processor.schemas import FILE_NAMES
from ..ranking import RankingResult
from ..service import NodeService
from .corpus import Corpus

TRANSACTORS = (Role.PRODUCT_MANAGER, Role.DATA_SCIENTIST, Role.AUDITOR)
REGISTER_ORDER = ("qi", "cw", "wmp", "wmm", "method")


def documents(corpus: Corpus, group: str, purposes=None) -> dict[str, Any]:
    """File documents for every registration verb of one weight group."""
    cfg = corpus.configs[group]
    purposes = list(cfg) if purposes is None else list(purposes)
    return {
        "qi": corpus.quality_indicators,
        "cw": {p: cfg[p]["qi_weights"] for p in purposes},
        "wmp": {p: cfg[p]["desired"] for p in purposes},
        "wmm": {p: cfg[p]["undesired"] for p in purposes},
        "method": corpus.evaluation_rows,
    }


def transactor_keys(seed: int) -> dict[str, KeyPair]:
    return {r.value: KeyPair.derive("transactor", seed, r.value) for r in TRANSACTORS}


class CliError(RuntimeError):
    def __init__(self, argv, code, output):
        super().__init__(f"synthrank {' '.join(map(str, argv))} exited {code}: {output.strip()}")
        self.code = code
        self.output = output


class Deployment:
    """Four validators (by default) with one serving the client API."""

    def __init__(self, seed: int = 0, n: int = 4, f: int = 1, workdir: str | Path | None = None,
                 faults: dict[str, dict[str, Any]] | None = None, serving_node: int = 0):
        self.seed = seed
        self.keys = transactor_keys(seed)
        roles = {kp.public_key: name for name, kp in self.keys.items()}
        self.config = NetworkConfig(n=n, f=f, seed=seed, roles=roles, faults=dict(faults or {}))
        self.network = Network(self.config)
        self.service = NodeService(self.network, serving_node)
        self.transport = LocalTransport(self.service)
        self._tmp = tempfile.TemporaryDirectory(prefix="synthrank-") if workdir is None else None
        self.workdir = Path(workdir or self._tmp.name)
        self.key_dir = self.workdir / "keys"
        for name, kp in self.keys.items():
            write_keypair(self.key_dir, name, kp, force=True)
        self.nonce = Client.deterministic_nonces(f"seed{seed}")
        self.client = Client(self.transport, keys=self.keys, nonce=self.nonce)

    def close(self):
        if self._tmp is not None:
            self._tmp.cleanup()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    # ---- CLI ---------------------------------------------------------------------

    def cli(self, *argv, check: bool = True) -> tuple[int, str]:
        out, err = io.StringIO(), io.StringIO()
        args = [str(a) for a in argv] + ["--key-dir", str(self.key_dir)]
        code = cli_main(args, transport=self.transport, out=out, err=err, nonce=self.nonce)
        text = out.getvalue() + err.getvalue()
        if check and code != 0:
            raise CliError(argv, code, text)
        return code, text

    def write_file(self, verb: str, doc: Any, name: str | None = None) -> Path:
        path = self.workdir / (name or FILE_NAMES[verb])
        path.write_text(canonical.dumps(doc) + "\n", encoding="utf-8")
        return path

    def register(self, docs: dict[str, Any]):
        signer = {"method": Role.DATA_SCIENTIST.value}
        for verb in REGISTER_ORDER:
            path = self.write_file(verb, docs[verb])
            self.cli(verb, path, "--key", signer.get(verb, Role.PRODUCT_MANAGER.value))

    def compute(self, purposes) -> None:
        path = self.write_file("qos", {"purposes": list(purposes)})
        self.cli("qos", path, "--key", Role.PRODUCT_MANAGER.value)

    def audit(self, docs: dict[str, Any], check: bool = True) -> tuple[int, str]:
        paths = {v: self.write_file(v, docs[v], f"audit_{FILE_NAMES[v]}") for v in REGISTER_ORDER}
        flags = [x for v in REGISTER_ORDER for x in (f"--{v}", paths[v])]
        return self.cli("audit", *flags, "--key", Role.AUDITOR.value, check=check)

    def rankings(self) -> dict[str, RankingResult]:
        _, text = self.cli("ranks", "--json")
        return {p: RankingResult.from_json(d) for p, d in canonical.decode(text.strip()).items()}

    def run_pipeline(self, docs: dict[str, Any]) -> dict[str, RankingResult]:
        self.register(docs)
        self.compute(sorted(docs["cw"]))
        return self.rankings()

    # ---- inspection --------------------------------------------------------------

    def honest_roots(self) -> dict[int, str]:
        return {i: self.network.nodes[i].state.root for i in self.network.honest}

    def settle(self, max_time: float = 60_000.0) -> bool:
        """Let every honest node catch up with the serving node."""
        target = self.service.node.height
        net = self.network
        return net.run_while(lambda: any(net.nodes[i].height < target for i in net.honest), net.now + max_time)
