import threading

import pytest

from synthrank import canonical
from synthrank.client import Client, HttpTransport
from synthrank.experiments.harness import Deployment, documents
from synthrank.ledger import make_address, make_batch, make_transaction, namespace
from synthrank.processor import build_payload
from synthrank.service import READ_LABELS, WRITE_LABELS, latency_probe, serve


@pytest.fixture
def dep(tmp_path):
    with Deployment(seed=5, workdir=tmp_path) as d:
        yield d


def batch(dep, verb, args, key="product_manager", nonce="x"):
    kp = dep.keys[key]
    return make_batch(kp, [make_transaction(kp, *build_payload(verb, args), nonce=nonce)])


QI = {"data_utility": {"PCD": {"kind": "lower_better"}}}


def test_submit_accepts_and_reports_id(dep):
    b = batch(dep, "qi", QI)
    code, doc = dep.service.handle("POST", "/batches", canonical.encode(b.to_json()))
    assert code == 202 and doc == {"batch_id": b.id, "accepted": True}
    assert dep.service.batch_status(b.id)["status"] == "PENDING"
    dep.transport.wait(b.id, 10)
    st = dep.service.batch_status(b.id)
    assert st["status"] == "COMMITTED" and st["height"] == 1


def test_tampered_signature_rejected(dep):
    b = batch(dep, "qi", QI)
    doc = b.to_json()
    sig = doc["transactions"][0]["header_signature"]
    doc["transactions"][0]["header_signature"] = sig[:-1] + ("0" if sig[-1] != "0" else "1")
    code, out = dep.service.handle("POST", "/batches", canonical.encode(doc))
    assert code == 400 and "invalid signature" in out["error"]


def test_malformed_body_rejected(dep):
    code, out = dep.service.handle("POST", "/batches", b"{nope")
    assert code == 400 and "malformed batch" in out["error"]


def test_duplicate_submission_commits_once(dep):
    b = batch(dep, "qi", QI)
    for _ in range(3):
        assert dep.service.submit_batch(b.to_json())[0] == 202
    dep.transport.wait(b.id, 10)
    dep.network.run_until(dep.network.now + 2000)
    assert dep.service.node.height == 1


def test_unknown_batch_and_routes(dep):
    assert dep.service.batch_status("ab" * 64)["status"] == "UNKNOWN"
    assert dep.service.handle("GET", "/nowhere")[0] == 404
    assert dep.service.handle("GET", "/batch_statuses")[0] == 400


def test_state_reads(dep):
    assert dep.client.submit("qi", QI, "product_manager").committed
    addr = make_address("qi", "data_utility")
    code, doc = dep.service.handle("GET", f"/state/{addr}")
    assert code == 200 and doc["data"][0]["data"] == {"qi": "data_utility", "metrics": QI["data_utility"]}
    assert dep.service.handle("GET", f"/state/{make_address('qi', 'other')}") == (200, {"data": []})
    assert dep.service.handle("GET", "/state/xyz")[0] == 400
    by_prefix = dep.service.handle("GET", f"/state?prefix={namespace('qi')}")
    by_name = dep.service.handle("GET", "/state?category=qi")
    assert by_prefix == by_name and len(by_prefix[1]["data"]) == 1


def test_reads_never_show_uncommitted_state(dep):
    b = batch(dep, "qi", QI)
    dep.service.submit_batch(b.to_json())
    assert dep.service.read_prefix("qi") == []


def test_nodes_agree_at_same_height(dep, corpus):
    dep.run_pipeline(documents(corpus, "correctness"))
    dep.settle()
    reads = {i: (dep.network.nodes[i].height, dep.network.nodes[i].state.items()) for i in range(4)}
    assert len({canonical.dumps([h, [[a, p.decode()] for a, p in items]]) for h, items in reads.values()}) == 1


def test_status_endpoint(dep):
    code, doc = dep.service.handle("GET", "/status")
    assert code == 200 and doc["height"] == 0 and doc["view"] == 0


# ---- latency ------------------------------------------------------------------------------


def loaded_for_latency(dep, corpus):
    docs = documents(corpus, "blockchain", ["B", "C"])
    dep.run_pipeline(docs)
    return docs


def test_latency_probe_samples(dep, corpus):
    docs = loaded_for_latency(dep, corpus)
    out = latency_probe(dep.client, docs, 3, purpose="B")
    assert out["unit"] == "simulated_ms" and out["failures"] == []
    assert list(out["write"]) == list(WRITE_LABELS)
    assert list(out["read"]) == list(READ_LABELS)
    for kind in ("write", "read"):
        for xs in out[kind].values():
            assert len(xs) == 3 and all(x > 0 for x in xs)


def test_latency_probe_zero_repetitions(dep, corpus):
    docs = loaded_for_latency(dep, corpus)
    out = latency_probe(dep.client, docs, 0)
    assert all(v == [] for v in out["write"].values())
    assert all(v == [] for v in out["read"].values())


# ---- real socket ---------------------------------------------------------------------------------


def test_http_listener(dep):
    server = serve(dep.service, "127.0.0.1", 0)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        url = f"http://127.0.0.1:{server.server_address[1]}"
        client = Client(HttpTransport(url, poll_interval=0.02), keys=dep.keys, timeout=20)
        result = client.submit("qi", QI, "product_manager")
        assert result.committed, result
        assert client.read("qis") == QI
        code, doc = client.transport.request("GET", "/state/zz")
        assert code == 400
    finally:
        server.shutdown()
        server.driver.stopped.set()
        server.server_close()
