import hashlib
import json
import re

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from synthrank import canonical
from synthrank.ledger import (
    CATEGORIES,
    EMPTY_ROOT,
    NULL_BLOCK_ID,
    AddressError,
    BlockStore,
    CryptoError,
    KeyPair,
    LedgerState,
    StateOverlay,
    StoreError,
    StructureError,
    Transaction,
    check_address,
    make_address,
    make_batch,
    make_block,
    make_genesis,
    make_transaction,
    namespace,
    role_registry,
    sign,
    verify,
)
from synthrank.ledger.crypto import read_keypair, write_keypair
from synthrank.ledger.state import category_of, state_root


def sha(text):
    return hashlib.sha512(text.encode()).hexdigest()


# ---- addresses -----------------------------------------------------------------


def test_address_matches_hand_built_digest():
    # independent construction from hashlib
    expected = sha("synthrank.qi")[:6] + sha("data_utility")[:64]
    assert make_address("qi", "data_utility") == expected


def test_address_deterministic_and_well_formed():
    a = make_address("qi", "data_utility")
    assert a == make_address("qi", "data_utility")
    for cat in CATEGORIES:
        addr = make_address(cat, "k")
        assert re.fullmatch(r"[0-9a-f]{70}", addr)
        assert category_of(addr) == cat


def test_categories_have_distinct_namespaces():
    prefixes = {namespace(c) for c in CATEGORIES}
    assert len(prefixes) == len(CATEGORIES)
    assert make_address("qi", "x")[:6] != make_address("rankings", "x")[:6]


def test_address_errors():
    with pytest.raises(AddressError):
        make_address("qi", "")
    with pytest.raises(AddressError):
        make_address("nonsense", "k")
    with pytest.raises(AddressError):
        check_address("abc")
    with pytest.raises(AddressError):
        check_address("G" * 70)


# ---- canonical encoding -------------------------------------------------------------


def test_canonical_form():
    assert canonical.dumps({"b": 1, "a": [1, 2]}) == '{"a":[1,2],"b":1}'
    assert canonical.dumps({"é": "ü"}) == '{"é":"ü"}'
    with pytest.raises(ValueError):
        canonical.dumps({"x": float("nan")})
    assert canonical.is_canonical(b'{"a":1}')
    assert not canonical.is_canonical(b'{ "a": 1 }')


json_values = st.recursive(
    st.none() | st.booleans() | st.integers(-10**6, 10**6) | st.floats(allow_nan=False, allow_infinity=False)
    | st.text(max_size=8),
    lambda kids: st.lists(kids, max_size=4) | st.dictionaries(st.text(max_size=6), kids, max_size=4),
    max_leaves=12,
)


@settings(max_examples=150, deadline=None)
@given(json_values)
def test_canonical_round_trip(value):
    data = canonical.encode(value)
    assert canonical.decode(data) == value
    assert canonical.encode(canonical.decode(data)) == data
    # same text as the stdlib with the documented options
    assert data == json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode()


# ---- state ------------------------------------------------------------------------------


def test_set_get_and_root_idempotence():
    s = LedgerState()
    assert s.root == EMPTY_ROOT
    a = make_address("qi", "q")
    r1 = s.set(a, b'{"x":1}')
    assert s.get(a) == b'{"x":1}'
    assert s.set(a, b'{"x":1}') == r1
    assert s.get(make_address("qi", "missing")) is None


def test_root_independent_of_insertion_order():
    pairs = [(make_address("qi", str(i)), canonical.encode({"i": i})) for i in range(10)]
    s1, s2 = LedgerState(), LedgerState()
    for a, p in pairs:
        s1.set(a, p)
    for a, p in reversed(pairs):
        s2.set(a, p)
    assert s1.root == s2.root
    assert s1 == s2


def test_root_matches_independent_construction():
    a, b = make_address("qi", "q1"), make_address("rankings", "p")
    s = LedgerState()
    s.set(b, b'{"r":2}')
    s.set(a, b'{"q":1}')
    pairs = sorted([[a, hashlib.sha512(b'{"q":1}').hexdigest()], [b, hashlib.sha512(b'{"r":2}').hexdigest()]])
    text = json.dumps(pairs, separators=(",", ":"))
    assert s.root == hashlib.sha512(text.encode()).hexdigest()
    assert state_root([(a, hashlib.sha512(b'{"q":1}').hexdigest())]) != s.root


def test_root_changes_with_any_byte():
    s = LedgerState()
    a = make_address("qi", "q")
    r = s.set(a, b'{"x":1}')
    assert s.set(a, b'{"x":2}') != r


def test_state_rejects_non_canonical_payload():
    with pytest.raises(ValueError):
        LedgerState().set(make_address("qi", "q"), b'{ "x": 1 }')


def test_prefix_items_sorted_and_filtered():
    s = LedgerState()
    for k in ("b", "a", "c"):
        s.set(make_address("qi", k), canonical.encode({"k": k}))
    s.set(make_address("rankings", "a"), b"{}")
    items = s.items(namespace("qi"))
    assert len(items) == 3
    assert [a for a, _ in items] == sorted(a for a, _ in items)


def test_snapshot_is_independent_and_json_round_trips():
    s = LedgerState()
    s.set(make_address("qi", "q"), b'{"x":1}')
    snap = s.snapshot()
    s.set(make_address("qi", "r"), b'{"x":2}')
    assert len(snap) == 1 and len(s) == 2
    assert LedgerState.from_json(s.to_json()) == s


def test_overlay_isolates_until_merged():
    base = LedgerState()
    a = make_address("qi", "q")
    base.set(a, b'{"x":1}')
    ov = StateOverlay(base)
    ov.set(a, b'{"x":2}')
    assert ov.get(a) == b'{"x":2}' and base.get(a) == b'{"x":1}'
    ov.merge_into_base()
    assert base.get(a) == b'{"x":2}'


# ---- crypto ---------------------------------------------------------------------------------


def test_sign_verify():
    kp, other = KeyPair.from_seed(b"\x01" * 32), KeyPair.from_seed(b"\x02" * 32)
    sig = sign(kp, b"hello")
    assert verify(kp.public_key, b"hello", sig)
    assert not verify(other.public_key, b"hello", sig)
    assert not verify(kp.public_key, b"hellp", sig)
    assert not verify(kp.public_key, b"hello", "zz")


def test_malformed_key_material():
    with pytest.raises(CryptoError):
        verify("abcd", b"x", "00")
    with pytest.raises(CryptoError):
        KeyPair.from_seed(b"short")
    with pytest.raises(CryptoError):
        KeyPair.from_private_hex("not hex")


def test_derived_keys_deterministic_and_distinct():
    assert KeyPair.derive("v", 1, 0).public_key == KeyPair.derive("v", 1, 0).public_key
    assert KeyPair.derive("v", 1, 0).public_key != KeyPair.derive("v", 1, 1).public_key


def test_key_files(tmp_path):
    kp = KeyPair.generate()
    priv, pub = write_keypair(tmp_path, "pm", kp)
    assert pub.read_text().strip() == kp.public_key
    assert read_keypair(tmp_path, "pm").public_key == kp.public_key
    with pytest.raises(FileExistsError):
        write_keypair(tmp_path, "pm", KeyPair.generate())
    write_keypair(tmp_path, "pm", KeyPair.generate(), force=True)
    assert read_keypair(tmp_path, "pm").public_key != kp.public_key


# ---- chain structures ------------------------------------------------------------------------

PM = KeyPair.derive("test", "pm")
OTHER = KeyPair.derive("test", "other")


def txn(payload=b'{"command":"qos","args":{"purposes":["A"]}}', nonce="n0", signer=PM):
    return make_transaction(signer, payload, ["b", "a"], ["c"], nonce=nonce)


def test_transaction_valid_and_ids():
    t = txn()
    assert t.problems() == []
    assert t.header["inputs"] == ["a", "b"]
    assert t.id == hashlib.sha512(canonical.encode(t.header)).hexdigest()
    assert t.signer == PM.public_key
    assert txn(nonce="n1").id != t.id
    assert Transaction.from_json(t.to_json()) == t


def test_transaction_tampering_detected():
    t = txn()
    bad_payload = Transaction(t.header, t.header_signature, b'{"command":"qos","args":{"purposes":["B"]}}')
    assert "payload digest mismatch" in " ".join(bad_payload.problems())
    sig = t.header_signature
    bad_sig = Transaction(t.header, sig[:-1] + ("0" if sig[-1] != "0" else "1"), t.payload)
    assert any("signature" in p for p in bad_sig.problems())


def test_batch_checks():
    t = txn()
    b = make_batch(PM, [t])
    assert b.problems() == []
    assert b.header["transaction_ids"] == [t.id]
    assert "empty batch" in make_batch(PM, []).problems()
    # transaction batched by someone other than its declared batcher
    assert any("batcher key mismatch" in p for p in make_batch(OTHER, [t]).problems())
    with pytest.raises(StructureError):
        type(b).from_json({"header": {}})


def test_block_linkage_and_genesis():
    settings_ = {"family": "synthrank", "validators": [PM.public_key], "f": 0,
                 "roles": {PM.public_key: "product_manager"}}
    g = make_genesis(settings_, EMPTY_ROOT)
    assert g.height == 0 and g.previous_block_id == NULL_BLOCK_ID and g.problems() == []
    assert g.settings["validators"] == [PM.public_key]
    b1 = make_block(PM, 1, g.id, [make_batch(PM, [txn()])], EMPTY_ROOT)
    assert b1.problems() == [] and b1.previous_block_id == g.id
    assert type(b1).from_json(b1.to_json()).id == b1.id
    assert role_registry(settings_)[PM.public_key].value == "product_manager"


# ---- store ---------------------------------------------------------------------------------------


def test_block_store_round_trip_and_corruption(tmp_path):
    g = make_genesis({"family": "synthrank", "validators": [], "f": 0, "roles": {}}, EMPTY_ROOT)
    b1 = make_block(PM, 1, g.id, [make_batch(PM, [txn()])], EMPTY_ROOT)
    store = BlockStore(tmp_path)
    store.append(g)
    store.append(b1, [{"sig": "x"}])
    loaded = BlockStore(tmp_path).load()
    assert [b.id for b, _ in loaded] == [g.id, b1.id]
    assert loaded[1][1] == [{"sig": "x"}]

    state = LedgerState()
    state.set(make_address("qi", "q"), b'{"x":1}')
    store.save_snapshot(state, 1, b1.id)
    assert store.load_snapshot() == (state, 1, b1.id)

    # skipping a height breaks the log
    broken = BlockStore(tmp_path / "broken")
    broken.append(g)
    broken.append(make_block(PM, 2, g.id, [], EMPTY_ROOT))
    with pytest.raises(StoreError):
        broken.load()
