"""Reproduction scenarios.

Each scenario returns a ``Report`` listing checks with computed and expected
values. Ranking scenarios run the full register, compute, read cycle through
the CLI against a four-node simulated network; baselines are computed
directly from the corpus since they have no ledger counterpart.
"""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Any

from .. import canonical
from ..analytics import (
    RankVector,
    baseline_weighted_normalized_average,
    baseline_weighted_rank_derived,
    correlations,
)
from ..ranking import RankingResult
from ..service import READ_LABELS, WRITE_LABELS, latency_probe
from .corpus import Corpus, load_corpus
from .harness import Deployment, documents

BAND = 0.15
EXACT_RHO = 1e-12


class ScenarioError(KeyError):
    pass


@dataclass
class Check:
    name: str
    computed: Any
    expected: Any
    ok: bool
    note: str = ""
    asserted: bool = True

    def to_json(self) -> dict[str, Any]:
        return {"name": self.name, "computed": self.computed, "expected": self.expected,
                "ok": self.ok, "asserted": self.asserted, "note": self.note}


@dataclass
class Report:
    scenario: str
    seed: int
    corpus_digest: str
    checks: list[Check] = field(default_factory=list)
    data: dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.ok for c in self.checks if c.asserted)

    def check(self, name: str, computed: Any, expected: Any, ok: bool, note: str = "",
              asserted: bool = True) -> Check:
        c = Check(name, _plain(computed), _plain(expected), bool(ok), note, asserted)
        self.checks.append(c)
        return c

    def to_json(self) -> dict[str, Any]:
        return {
            "scenario": self.scenario,
            "seed": self.seed,
            "corpus_digest": self.corpus_digest,
            "passed": self.passed,
            "checks": [c.to_json() for c in self.checks],
            "data": _plain(self.data),
        }

    def to_markdown(self) -> str:
        lines = [
            f"# {self.scenario}",
            "",
            f"- seed: {self.seed}",
            f"- corpus digest: `{self.corpus_digest[:32]}...`",
            f"- result: {'PASS' if self.passed else 'FAIL'}",
            "",
            "| check | computed | expected | ok | note |",
            "|---|---|---|---|---|",
        ]
        for c in self.checks:
            lines.append(
                f"| {c.name} | {_cell(c.computed)} | {_cell(c.expected)} | {_verdict(c)} | {c.note} |"
            )
        return "\n".join(lines) + "\n"


def _plain(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    return x


def _verdict(c: Check) -> str:
    mark = "yes" if c.ok else "NO"
    return mark if c.asserted else f"{mark} (info)"


def _cell(x) -> str:
    if isinstance(x, float):
        return f"{x:.4g}"
    return canonical.dumps(x).replace("|", "\\|") if not isinstance(x, str) else x


def _vector(result: RankingResult) -> RankVector:
    return RankVector.from_result(result)


def _pair_checks(report: Report, table: str, results: dict[str, RankingResult], corpus: Corpus,
                 assert_band: bool, direction: Callable[[float, float], bool], direction_text: str):
    reported = corpus.reported(table)
    for pair, (tau_reported, rho_reported) in reported.items():
        a, b = pair.split("/")
        tau, rho = correlations(_vector(results[a]), _vector(results[b]))
        report.data.setdefault("correlations", {})[pair] = {"tau": tau, "rho": rho}
        report.check(f"{pair} direction", {"tau": tau, "rho": rho}, direction_text, direction(tau, rho))
        within = abs(tau - tau_reported) <= BAND
        report.check(f"{pair} tau within {BAND} of reported", tau, tau_reported, within, asserted=assert_band)
        report.check(f"{pair} rho within {BAND} of reported", rho, rho_reported,
                     abs(rho - rho_reported) <= BAND, asserted=False)


def _ranking_data(results: dict[str, RankingResult]) -> dict[str, Any]:
    return {p: {"ranks": r.ranks(), "scores": r.scores()} for p, r in results.items()}


def _pipeline(corpus: Corpus, group: str, seed: int) -> tuple[dict[str, RankingResult], dict[str, Any]]:
    with Deployment(seed=seed) as dep:
        results = dep.run_pipeline(documents(corpus, group))
        dep.settle()
        roots = dep.honest_roots()
        meta = {"height": dep.service.node.height, "state_root": roots[0],
                "honest_roots_agree": len(set(roots.values())) == 1}
    return results, meta


# ---- scenarios -----------------------------------------------------------------------


def correctness(corpus: Corpus, seed: int) -> Report:
    report = Report("correctness", seed, corpus.digest)
    results, meta = _pipeline(corpus, "correctness", seed)
    report.data["ledger"] = meta
    report.data["rankings"] = _ranking_data(results)
    reported = corpus.reported("correctness")
    for p in sorted(results):
        ranks = results[p].ranks()
        golden = corpus.predicted(p)
        report.check(f"{p} ranks equal published ranking", ranks, golden, ranks == golden)
        tau, rho = correlations(_vector(results[p]), RankVector.from_mapping(corpus.ground_truth(p)))
        report.check(f"{p} tau vs ground truth", tau, 1.0, tau == 1.0)
        report.check(f"{p} rho vs ground truth", rho, reported[p][1], rho >= 1 - EXACT_RHO)
    return report


def metric_weight_sensitivity(corpus: Corpus, seed: int) -> Report:
    report = Report("metric-weight-sensitivity", seed, corpus.digest)
    results, meta = _pipeline(corpus, "metric_weight", seed)
    report.data["ledger"] = meta
    report.data["rankings"] = _ranking_data(results)
    _pair_checks(report, "metric_weight", results, corpus, True, lambda t, r: abs(t) < 1, "|tau| < 1")
    return report


def qi_weight_sensitivity(corpus: Corpus, seed: int) -> Report:
    report = Report("qi-weight-sensitivity", seed, corpus.digest)
    results, meta = _pipeline(corpus, "qi_weight", seed)
    report.data["ledger"] = meta
    report.data["rankings"] = _ranking_data(results)
    _pair_checks(report, "qi_weight", results, corpus, False, lambda t, r: abs(t) < 1, "|tau| < 1")
    return report


def desired_undesired_swap(corpus: Corpus, seed: int) -> Report:
    report = Report("desired-undesired-swap", seed, corpus.digest)
    results, meta = _pipeline(corpus, "desired_undesired", seed)
    report.data["ledger"] = meta
    report.data["rankings"] = _ranking_data(results)
    _pair_checks(report, "desired_undesired", results, corpus, True,
                 lambda t, r: t < 0 and r < 0, "tau < 0 and rho < 0")
    return report


def _baseline(corpus: Corpus, seed: int, name: str, table: str, fn) -> tuple[Report, dict[str, float]]:
    report = Report(name, seed, corpus.digest)
    reported = corpus.reported(table)
    taus = {}
    for p, cfg in corpus.configs["correctness"].items():
        vec = fn(corpus.evaluation, cfg["desired"], corpus.classifications)
        tau, rho = correlations(vec, RankVector.from_mapping(corpus.ground_truth(p)))
        taus[p] = tau
        report.data.setdefault("baseline", {})[p] = {"ranks": vec.as_dict(), "tau": tau, "rho": rho,
                                                     "reported": reported[p]}
    return report, taus


def baseline_1(corpus: Corpus, seed: int) -> Report:
    report, taus = _baseline(corpus, seed, "baseline-1", "baseline_1", baseline_weighted_normalized_average)
    reported = corpus.reported("baseline_1")
    for p in sorted(taus):
        report.check(f"{p} tau in (0, 1)", taus[p], "(0, 1)", 0 < taus[p] < 1)
        report.check(f"{p} tau within {BAND} of reported", taus[p], reported[p][0],
                     abs(taus[p] - reported[p][0]) <= BAND)
    order = sorted(taus, key=lambda p: -taus[p])
    report.check("tau ordering", order, ["B", "C", "A"], order == ["B", "C", "A"])
    return report


def baseline_2(corpus: Corpus, seed: int) -> Report:
    report, taus = _baseline(corpus, seed, "baseline-2", "baseline_2", baseline_weighted_rank_derived)
    for p in sorted(taus):
        report.check(f"{p} tau vs ground truth", taus[p], 1.0, taus[p] == 1.0)
    return report


def inverted_documents(corpus: Corpus, group: str = "correctness") -> dict[str, Any]:
    docs = documents(corpus, group)
    docs["wmp"], docs["wmm"] = docs["wmm"], docs["wmp"]
    return docs


def _reverses_up_to_ties(a: dict[str, float], b: dict[str, float]) -> bool:
    gens = sorted(a)
    for x in gens:
        for y in gens:
            if a[x] > a[y] and not b[x] < b[y]:
                return False
    return True


def sign_inversion(corpus: Corpus, seed: int) -> Report:
    report = Report("sign-inversion", seed, corpus.digest)
    original, _ = _pipeline(corpus, "correctness", seed)
    with Deployment(seed=seed) as dep:
        docs = inverted_documents(corpus)
        inverted = dep.run_pipeline(docs)
    report.data["original"] = _ranking_data(original)
    report.data["inverted"] = _ranking_data(inverted)
    for p in sorted(original):
        a, b = original[p].scores(), inverted[p].scores()
        negated = all(b[g] == -a[g] for g in a)
        report.check(f"{p} overall scores negate exactly", {g: b[g] for g in sorted(b)},
                     {g: -a[g] for g in sorted(a)}, negated)
        report.check(f"{p} order reverses up to ties", inverted[p].ranks(), "reverse of original",
                     _reverses_up_to_ties(a, b))
        tau, rho = correlations(_vector(original[p]), _vector(inverted[p]))
        report.check(f"{p} tau vs original <= 0", tau, "<= 0", tau <= 0)
        report.data.setdefault("correlations", {})[p] = {"tau": tau, "rho": rho}
    return report


LATENCY_GROUP = "blockchain"


def latency_purposes(corpus: Corpus) -> list[str]:
    """Purposes of the latency workload whose specs pass validation."""
    from ..ranking import validate_purpose_spec

    return [p for p in corpus.configs[LATENCY_GROUP] if not validate_purpose_spec(corpus.spec(LATENCY_GROUP, p))]


def latency(corpus: Corpus, seed: int, repetitions: int = 10) -> Report:
    report = Report("latency", seed, corpus.digest)
    purposes = latency_purposes(corpus)
    excluded = sorted(set(corpus.configs[LATENCY_GROUP]) - set(purposes))
    docs = documents(corpus, LATENCY_GROUP, purposes)
    with Deployment(seed=seed) as dep:
        dep.run_pipeline(docs)
        dep.audit(docs)
        keys = {"pm": "product_manager", "ds": "data_scientist", "auditor": "auditor"}
        samples = latency_probe(dep.client, docs, repetitions, keys=keys, purpose=purposes[0], seed=seed)
    report.data["samples"] = samples
    report.data["excluded_purposes"] = excluded
    summary = {}
    for kind, labels in (("write", WRITE_LABELS), ("read", READ_LABELS)):
        for label in labels:
            xs = samples[kind][label]
            summary[label] = {"n": len(xs), "mean": sum(xs) / len(xs) if xs else None,
                              "min": min(xs, default=None), "max": max(xs, default=None)}
            report.check(f"{label}: >= {repetitions} positive samples", len(xs), repetitions,
                         len(xs) >= repetitions and all(x > 0 for x in xs))
    report.data["summary"] = summary
    mean = {k: _mean([x for lab in samples[k].values() for x in lab]) for k in ("write", "read")}
    report.data["mean_ms"] = mean
    report.check("no failed submissions", samples["failures"], [], not samples["failures"])
    report.check("mean write >= mean read", mean, "write >= read",
                 mean["write"] is not None and mean["read"] is not None and mean["write"] >= mean["read"],
                 "simulated ms; not comparable to any hardware run", asserted=False)
    return report


def _mean(xs):
    return sum(xs) / len(xs) if xs else None


SCENARIOS: dict[str, Callable[[Corpus, int], Report]] = {
    "correctness": correctness,
    "metric-weight-sensitivity": metric_weight_sensitivity,
    "qi-weight-sensitivity": qi_weight_sensitivity,
    "desired-undesired-swap": desired_undesired_swap,
    "baseline-1": baseline_1,
    "baseline-2": baseline_2,
    "sign-inversion": sign_inversion,
    "latency": latency,
}


def run_scenario(name: str, seed: int = 0, corpus: Corpus | None = None) -> Report:
    try:
        fn = SCENARIOS[name]
    except KeyError:
        raise ScenarioError(f"unknown scenario {name!r}; known: {', '.join(SCENARIOS)}") from None
    return fn(corpus or load_corpus(), seed)
