"""Typed views over ledger state entries.

Every entry carries its own key inside the payload, because addresses are
one-way digests and prefix scans would otherwise lose the names.
"""

from __future__ import annotations

from collections.abc import Iterable
from typing import Any, Protocol

from .. import canonical
from ..ledger.state import make_address, namespace
from ..ranking import EvaluationMatrix, MetricClassification, PurposeSpec, QualityIndicator

KEY_FIELD = {
    "qi": "qi",
    "qi_weights": "purpose",
    "wm_plus": "purpose",
    "wm_minus": "purpose",
    "generators": "generator",
    "evaluation": "generator",
    "rankings": "purpose",
    "audit": "run_id",
}
# registration verb -> (category, field holding the inner map)
REGISTRY = {
    "qi": ("qi", "metrics"),
    "cw": ("qi_weights", "weights"),
    "wmp": ("wm_plus", "weights"),
    "wmm": ("wm_minus", "weights"),
    "method": ("evaluation", "scores"),
}


class Readable(Protocol):
    def get(self, address: str) -> bytes | None: ...
    def items(self, prefix: str = "") -> list[tuple[str, bytes]]: ...


def entry(category: str, key: str, body: dict[str, Any]) -> tuple[str, bytes]:
    doc = {KEY_FIELD[category]: key, **body}
    return make_address(category, key), canonical.encode(doc)


def read_one(state: Readable, category: str, key: str) -> dict[str, Any] | None:
    raw = state.get(make_address(category, key))
    return None if raw is None else canonical.decode(raw)


def read_all(state: Readable, category: str) -> dict[str, dict[str, Any]]:
    field = KEY_FIELD[category]
    out = {}
    for _, raw in state.items(namespace(category)):
        doc = canonical.decode(raw)
        out[doc[field]] = doc
    return dict(sorted(out.items()))


def registered_table(state: Readable, verb: str) -> dict[str, dict[str, Any]]:
    """The document a registration verb would have been given, rebuilt from state."""
    category, inner = REGISTRY[verb]
    return {key: doc[inner] for key, doc in read_all(state, category).items()}


def quality_indicators(state: Readable) -> dict[str, dict[str, dict[str, Any]]]:
    return registered_table(state, "qi")


def metric_owner(qis: dict[str, dict[str, Any]]) -> dict[str, str]:
    return {m: qi for qi, metrics in qis.items() for m in metrics}


def generator_order(state: Readable) -> list[str]:
    gens = read_all(state, "generators")
    return sorted(gens, key=lambda g: (gens[g]["order"], g))


class MissingItem(LookupError):
    pass


def purpose_spec(state: Readable, purpose: str, qis: dict | None = None) -> PurposeSpec:
    qis = quality_indicators(state) if qis is None else qis
    cw = read_one(state, "qi_weights", purpose)
    plus = read_one(state, "wm_plus", purpose)
    minus = read_one(state, "wm_minus", purpose)
    if cw is None or (plus is None and minus is None):
        raise MissingItem(f"purpose not found: {purpose}")
    return spec_from_tables(purpose, qis, cw["weights"], (plus or {}).get("weights", {}),
                            (minus or {}).get("weights", {}))


def spec_from_tables(purpose: str, qis: dict, qi_weights: dict, desired: dict, undesired: dict) -> PurposeSpec:
    return PurposeSpec(
        purpose=purpose,
        quality_indicators=tuple(QualityIndicator(q, frozenset(ms)) for q, ms in sorted(qis.items())),
        qi_weights=qi_weights,
        desired_weights=desired,
        undesired_weights=undesired,
        classifications={m: MetricClassification.from_json(c) for ms in qis.values() for m, c in ms.items()},
    )


def evaluation_matrix(state: Readable, metrics: Iterable[str]) -> EvaluationMatrix:
    generators = generator_order(state)
    if not generators:
        raise MissingItem("no generators registered")
    scores = registered_table(state, "method")
    return build_matrix(generators, scores, metrics)


def build_matrix(generators: list[str], scores: dict[str, dict[str, float]], metrics: Iterable[str]) -> EvaluationMatrix:
    metrics = sorted(set(metrics))
    rows = []
    for g in generators:
        row = scores.get(g, {})
        missing = [m for m in metrics if m not in row]
        if missing:
            raise MissingItem(f"generator {g} has no value for metric {missing[0]}")
        rows.append([row[m] for m in metrics])
    return EvaluationMatrix(generators, metrics, rows)
