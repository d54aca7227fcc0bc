"""Bundled evaluation data and purpose configurations.

The data reproduce the published BREAST-small SEER metric values for eight
generators and every weight configuration used in the experiments. A digest
over the canonical form of all files guards against silent edits.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from typing import Any

from .. import canonical
from ..ranking import EvaluationMatrix, MetricClassification, PurposeSpec, QualityIndicator

FILES = (
    "evaluation.json",
    "quality_indicators.json",
    "purposes.json",
    "reference_rankings.json",
)

CORPUS_DIGEST = (
    "60f2706fb97dc04f874907da02c37bca38918c024e3a958d724ceb9ab731eac8"
    "7612bf5a0830b363c8df64718d2011e70990fd0d24e68846787fe7d4d52eed8c"
)


class CorpusError(RuntimeError):
    pass


def _read_files() -> dict[str, Any]:
    root = resources.files(__package__) / "data"
    return {name: json.loads((root / name).read_text("utf-8")) for name in FILES}


def corpus_digest(files: dict[str, Any] | None = None) -> str:
    return canonical.digest(files if files is not None else _read_files())


@dataclass(frozen=True)
class Corpus:
    evaluation: EvaluationMatrix
    evaluation_rows: dict[str, dict[str, float]]
    quality_indicators: dict[str, dict[str, dict[str, Any]]]
    configs: dict[str, dict[str, dict[str, Any]]]
    reference: dict[str, Any]
    digest: str

    @property
    def classifications(self) -> dict[str, MetricClassification]:
        return {
            metric: MetricClassification.from_json(c)
            for metrics in self.quality_indicators.values()
            for metric, c in metrics.items()
        }

    @property
    def qi_objects(self) -> tuple[QualityIndicator, ...]:
        return tuple(
            QualityIndicator(name, frozenset(metrics))
            for name, metrics in sorted(self.quality_indicators.items())
        )

    def spec(self, group: str, purpose: str, *, qi_weights: dict[str, float] | None = None) -> PurposeSpec:
        cfg = self.configs[group][purpose]
        return PurposeSpec(
            purpose=purpose,
            quality_indicators=self.qi_objects,
            qi_weights=qi_weights if qi_weights is not None else cfg["qi_weights"],
            desired_weights=cfg["desired"],
            undesired_weights=cfg["undesired"],
            classifications=self.classifications,
        )

    def specs(self, group: str) -> list[PurposeSpec]:
        return [self.spec(group, p) for p in self.configs[group]]

    def ground_truth(self, purpose: str) -> dict[str, int]:
        return dict(self.reference["ground_truth"][purpose])

    def predicted(self, purpose: str) -> dict[str, int]:
        return dict(self.reference["predicted"][purpose])

    def reported(self, table: str) -> dict[str, list[float]]:
        return dict(self.reference["reported"][table])


def load_corpus(verify: bool = True) -> Corpus:
    files = _read_files()
    digest = corpus_digest(files)
    if verify and digest != CORPUS_DIGEST:
        raise CorpusError(f"corpus digest mismatch: {digest[:16]}... != {CORPUS_DIGEST[:16]}...")
    ev = files["evaluation.json"]
    rows = {g: ev["rows"][g] for g in ev["generators"]}
    return Corpus(
        evaluation=EvaluationMatrix.from_rows(rows),
        evaluation_rows=rows,
        quality_indicators=files["quality_indicators.json"],
        configs=files["purposes.json"],
        reference=files["reference_rankings.json"],
        digest=digest,
    )
