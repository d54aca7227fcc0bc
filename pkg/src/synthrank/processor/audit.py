"""Independent audit of ledger contents against the auditor's own copies.

Three checks run per purpose. SpecMatch compares the provided QI
definitions, QI weights and metric weight maps with the registered ones.
EvalMatch compares the provided evaluation matrix and generator roster.
RankMatch recomputes the ranking from registered inputs and compares it with
the stored result.
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass
from typing import Any

from .. import canonical
from ..ranking import RankingError, rank_generators, transform, validate_purpose_spec
from . import views
from .schemas import SchemaError, parse_document

CHECKS = ("SpecMatch", "EvalMatch", "RankMatch")
WILDCARD = "*"


@dataclass(frozen=True)
class Finding:
    purpose: str
    check: str
    ok: bool
    detail: str = ""

    def to_json(self) -> dict[str, Any]:
        return {"purpose": self.purpose, "check": self.check, "ok": self.ok, "detail": self.detail}


@dataclass(frozen=True)
class AuditReport:
    run_id: str
    height: int
    auditor: str
    findings: tuple[Finding, ...]

    @property
    def is_consistent(self) -> bool:
        return bool(self.findings) and all(f.ok for f in self.findings)

    def failed(self) -> list[Finding]:
        return [f for f in self.findings if not f.ok]

    def to_json(self) -> dict[str, Any]:
        return {
            "run_id": self.run_id,
            "height": self.height,
            "auditor": self.auditor,
            "findings": [f.to_json() for f in self.findings],
            "isConsistent": self.is_consistent,
        }

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> AuditReport:
        findings = tuple(Finding(f["purpose"], f["check"], f["ok"], f["detail"]) for f in data["findings"])
        return cls(data["run_id"], data["height"], data["auditor"], findings)


def audit_run_id(height: int, auditor: str, files: Mapping[str, str]) -> str:
    return canonical.digest(
        {
            "height": height,
            "auditor": auditor,
            "files": {name: canonical.sha512_hex(text) for name, text in sorted(files.items())},
        }
    )


def _diff_maps(label: str, given: Mapping | None, stored: Mapping | None) -> list[str]:
    if given == stored:
        return []
    if given is None:
        return [f"{label}: registered but not provided"]
    if stored is None:
        return [f"{label}: provided but not registered"]
    out = []
    for key in sorted(set(given) | set(stored)):
        a, b = given.get(key), stored.get(key)
        if a != b:
            out.append(f"{label}[{key}]: provided {canonical.dumps(a)} vs ledger {canonical.dumps(b)}")
    return out


def _parse(files: Mapping[str, str], verb: str) -> tuple[dict | None, str | None]:
    try:
        return parse_document(verb, files[verb]), None
    except SchemaError as exc:
        return None, f"{verb} file unparseable: {exc}"


def run_audit(
    pm_files: Mapping[str, str],
    ds_files: Mapping[str, str],
    state: views.Readable,
    *,
    height: int,
    auditor: str,
) -> AuditReport:
    files = {**pm_files, **ds_files}
    parsed, errors = {}, {}
    for verb in ("qi", "cw", "wmp", "wmm", "method"):
        parsed[verb], err = _parse(files, verb)
        if err:
            errors[verb] = err

    stored = {verb: views.registered_table(state, verb) for verb in ("qi", "cw", "wmp", "wmm", "method")}
    stored_rankings = views.read_all(state, "rankings")
    purposes = set(stored["cw"]) | set(stored["wmp"]) | set(stored["wmm"]) | set(stored_rankings)
    for verb in ("cw", "wmp", "wmm"):
        purposes |= set(parsed[verb] or {})
    purposes = sorted(purposes) or [WILDCARD]

    findings: list[Finding] = []
    roster_given = sorted(parsed["method"]) if parsed["method"] is not None else None
    roster_stored = views.generator_order(state)

    for purpose in purposes:
        # SpecMatch
        pm_errors = [errors[v] for v in ("qi", "cw", "wmp", "wmm") if v in errors]
        if pm_errors:
            findings.append(Finding(purpose, "SpecMatch", False, "; ".join(pm_errors)))
        else:
            diffs = _diff_maps("qi", parsed["qi"], stored["qi"])
            for verb in ("cw", "wmp", "wmm"):
                diffs += _diff_maps(f"{verb}:{purpose}", parsed[verb].get(purpose), stored[verb].get(purpose))
            findings.append(Finding(purpose, "SpecMatch", not diffs, "; ".join(diffs)))

        # EvalMatch
        if "method" in errors:
            findings.append(Finding(purpose, "EvalMatch", False, errors["method"]))
        else:
            diffs = []
            if roster_given != sorted(roster_stored):
                diffs.append(f"generators: provided {roster_given} vs ledger {sorted(roster_stored)}")
            for g in sorted(set(parsed["method"]) & set(stored["method"])):
                diffs += _diff_maps(f"E[{g}]", parsed["method"][g], stored["method"][g])
            findings.append(Finding(purpose, "EvalMatch", not diffs, "; ".join(diffs)))

        # RankMatch
        findings.append(_rank_check(state, purpose, stored_rankings.get(purpose)))

    files_for_id = {f"pm/{k}": v for k, v in pm_files.items()} | {f"ds/{k}": v for k, v in ds_files.items()}
    run_id = audit_run_id(height, auditor, files_for_id)
    return AuditReport(run_id, height, auditor, tuple(findings))


def _rank_check(state: views.Readable, purpose: str, stored: Mapping | None) -> Finding:
    if purpose == WILDCARD:
        return Finding(purpose, "RankMatch", False, "nothing registered to audit")
    if stored is None:
        return Finding(purpose, "RankMatch", False, "no stored ranking")
    try:
        spec = views.purpose_spec(state, purpose)
        problems = validate_purpose_spec(spec)
        if problems:
            return Finding(purpose, "RankMatch", False, "; ".join(map(str, problems)))
        evaluation = views.evaluation_matrix(state, spec.metrics)
        recomputed = rank_generators(spec, transform(spec, evaluation)).to_json()
    except (views.MissingItem, RankingError, ValueError) as exc:
        return Finding(purpose, "RankMatch", False, f"recomputation failed: {exc}")
    if canonical.encode(recomputed) == canonical.encode(dict(stored)):
        return Finding(purpose, "RankMatch", True)
    got = {e["generator"]: e["rank"] for e in stored.get("entries", [])}
    want = {e["generator"]: e["rank"] for e in recomputed["entries"]}
    diffs = [f"{g}: ledger {got.get(g)} vs recomputed {want.get(g)}" for g in sorted(set(got) | set(want))
             if got.get(g) != want.get(g)]
    return Finding(purpose, "RankMatch", False, "; ".join(diffs) or "stored scores differ from recomputation")
