"""Purpose-specific ranking of synthetic data generators.

A purpose weights quality indicators (QIs) and, inside them, metrics that
are either *desired* (good performance rewards a generator) or *undesired*
(good performance penalises it). Raw metric values are first turned into
inverted per-metric ranks, then combined into one weighted score per
generator::

    score(g) = sum_{m in desired}   e_plus[g, m]  * w_plus[m]  * w_qi[qi(m)]
             - sum_{m in undesired} e_minus[g, m] * w_minus[m] * w_qi[qi(m)]

Everything here is pure and deterministic. Metrics are always visited in
sorted order so float sums are bit-identical across runs and input orders.
"""

from __future__ import annotations

import enum
import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Any

import numpy as np

TOLERANCE = 1e-9


class RankingError(ValueError):
    """Raised when inputs cannot be ranked (missing metric, empty roster, ...)."""


class MetricKind(str, enum.Enum):
    LOWER_BETTER = "lower_better"
    HIGHER_BETTER = "higher_better"
    CLOSER_TO_CONSTANT = "closer_to_constant"


@dataclass(frozen=True)
class MetricClassification:
    kind: MetricKind
    constant: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", MetricKind(self.kind))
        if self.kind is MetricKind.CLOSER_TO_CONSTANT:
            if self.constant is None or not math.isfinite(self.constant):
                raise ValueError("closer_to_constant needs a finite constant")
        elif self.constant is not None:
            raise ValueError(f"{self.kind.value} takes no constant")

    def sort_key(self, value: float) -> float:
        """Map a raw value to a key where smaller always means better."""
        if self.kind is MetricKind.LOWER_BETTER:
            return value
        if self.kind is MetricKind.HIGHER_BETTER:
            return -value
        return abs(value - self.constant)

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {"kind": self.kind.value}
        if self.constant is not None:
            out["constant"] = self.constant
        return out

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> MetricClassification:
        return cls(MetricKind(data["kind"]), data.get("constant"))


LOWER_BETTER = MetricClassification(MetricKind.LOWER_BETTER)
HIGHER_BETTER = MetricClassification(MetricKind.HIGHER_BETTER)


def closer_to(constant: float) -> MetricClassification:
    return MetricClassification(MetricKind.CLOSER_TO_CONSTANT, constant)


@dataclass(frozen=True)
class QualityIndicator:
    name: str
    metrics: frozenset[str]

    def __post_init__(self):
        object.__setattr__(self, "metrics", frozenset(self.metrics))


def _frozen_map(m: Mapping | None) -> Mapping:
    return MappingProxyType(dict(m or {}))


@dataclass(frozen=True)
class PurposeSpec:
    """Complete ranking criteria for one purpose."""

    purpose: str
    quality_indicators: Sequence[QualityIndicator]
    qi_weights: Mapping[str, float]
    desired_weights: Mapping[str, float]
    undesired_weights: Mapping[str, float]
    classifications: Mapping[str, MetricClassification]

    def __post_init__(self):
        object.__setattr__(self, "quality_indicators", tuple(self.quality_indicators))
        for name in ("qi_weights", "desired_weights", "undesired_weights", "classifications"):
            object.__setattr__(self, name, _frozen_map(getattr(self, name)))

    @property
    def metrics(self) -> list[str]:
        return sorted(set(self.desired_weights) | set(self.undesired_weights))

    def qi_of(self, metric: str) -> str:
        owners = [qi.name for qi in self.quality_indicators if metric in qi.metrics]
        if len(owners) != 1:
            raise RankingError(
                f"purpose {self.purpose!r}: metric {metric!r} belongs to "
                f"{len(owners)} quality indicators, expected exactly 1"
            )
        return owners[0]


@dataclass(frozen=True)
class Violation:
    kind: str  # weight-sum | disjointness | range | orphan-metric | classification
    message: str

    def __str__(self):
        return f"{self.kind}: {self.message}"


def validate_purpose_spec(spec: PurposeSpec) -> list[Violation]:
    """Every admissibility problem in ``spec``; empty list means admissible."""
    report: list[Violation] = []

    def check_weights(label: str, weights: Mapping[str, float], required: bool):
        for key, w in sorted(weights.items()):
            if not (isinstance(w, (int, float)) and math.isfinite(w) and 0.0 <= w <= 1.0):
                report.append(Violation("range", f"{label} weight {key}={w!r} outside [0, 1]"))
        if weights or required:
            total = math.fsum(weights.values())
            if abs(total - 1.0) > TOLERANCE:
                report.append(Violation("weight-sum", f"{label} weights sum {total:g} ≠ 1"))

    check_weights("qi", spec.qi_weights, required=True)
    check_weights("desired", spec.desired_weights, required=False)
    check_weights("undesired", spec.undesired_weights, required=False)

    for metric in sorted(set(spec.desired_weights) & set(spec.undesired_weights)):
        report.append(
            Violation("disjointness", f"metric {metric} is both desired and undesired")
        )

    seen: dict[str, str] = {}
    for qi in spec.quality_indicators:
        for metric in sorted(qi.metrics):
            if metric in seen:
                report.append(
                    Violation(
                        "disjointness",
                        f"metric {metric} in quality indicators {seen[metric]} and {qi.name}",
                    )
                )
            else:
                seen[metric] = qi.name
    qi_names = {qi.name for qi in spec.quality_indicators}
    for name in sorted(set(spec.qi_weights) - qi_names):
        report.append(Violation("orphan-metric", f"qi weight for unknown quality indicator {name}"))

    for metric in spec.metrics:
        if metric not in seen:
            report.append(
                Violation("orphan-metric", f"metric {metric} belongs to no quality indicator")
            )
        elif seen[metric] not in spec.qi_weights:
            report.append(
                Violation(
                    "orphan-metric",
                    f"metric {metric}: quality indicator {seen[metric]} has no weight",
                )
            )
        if metric not in spec.classifications:
            report.append(Violation("classification", f"metric {metric} has no classification"))
    return report


@dataclass(frozen=True)
class EvaluationMatrix:
    """Raw generator x metric scores; row order is registration order."""

    generators: tuple[str, ...]
    metrics: tuple[str, ...]
    scores: np.ndarray

    def __post_init__(self):
        gens = tuple(self.generators)
        mets = tuple(self.metrics)
        scores = np.array(self.scores, dtype=float, copy=True)
        if scores.ndim != 2 or scores.shape != (len(gens), len(mets)):
            raise ValueError(
                f"scores shape {scores.shape} does not match "
                f"{len(gens)} generators x {len(mets)} metrics"
            )
        if len(set(gens)) != len(gens):
            raise ValueError("duplicate generator identifiers")
        if len(set(mets)) != len(mets):
            raise ValueError("duplicate metric identifiers")
        if not np.all(np.isfinite(scores)):
            raise ValueError("evaluation matrix contains non-finite values")
        scores.flags.writeable = False
        object.__setattr__(self, "generators", gens)
        object.__setattr__(self, "metrics", mets)
        object.__setattr__(self, "scores", scores)

    @classmethod
    def from_rows(cls, rows: Mapping[str, Mapping[str, float]]) -> EvaluationMatrix:
        """Build from ``{generator: {metric: value}}``; every row must cover the same metrics."""
        gens = list(rows)
        if not gens:
            return cls((), (), np.zeros((0, 0)))
        metrics = sorted({m for r in rows.values() for m in r})
        missing = [(g, m) for g in gens for m in metrics if m not in rows[g]]
        if missing:
            g, m = missing[0]
            raise ValueError(f"generator {g} has no value for metric {m}")
        return cls(gens, metrics, [[rows[g][m] for m in metrics] for g in gens])

    def column(self, metric: str) -> np.ndarray:
        try:
            return self.scores[:, self.metrics.index(metric)]
        except ValueError:
            raise RankingError(f"evaluation matrix has no column for metric {metric}") from None

    def to_rows(self) -> dict[str, dict[str, float]]:
        return {
            g: {m: float(self.scores[i, j]) for j, m in enumerate(self.metrics)}
            for i, g in enumerate(self.generators)
        }


@dataclass(frozen=True)
class TransformedMatrices:
    purpose: str
    generators: tuple[str, ...]
    plus_metrics: tuple[str, ...]
    minus_metrics: tuple[str, ...]
    e_plus: np.ndarray
    e_minus: np.ndarray


def competition_ranks(keys: Sequence[float], tol: float = TOLERANCE) -> list[int]:
    """1 + number of entries strictly smaller (beyond ``tol``); ties share the best rank."""
    ordered = sorted(keys)
    ranks = []
    for k in keys:
        # count of values < k - tol, via binary search over the sorted keys
        lo, hi = 0, len(ordered)
        while lo < hi:
            mid = (lo + hi) // 2
            if ordered[mid] < k - tol:
                lo = mid + 1
            else:
                hi = mid
        ranks.append(lo + 1)
    return ranks


def inverted_ranks(values: Sequence[float], classification: MetricClassification) -> list[int]:
    n = len(values)
    ranks = competition_ranks([classification.sort_key(float(v)) for v in values])
    return [n + 1 - r for r in ranks]


def transform(purpose: PurposeSpec, evaluation: EvaluationMatrix) -> TransformedMatrices:
    """Replace each relevant metric column with inverted competition ranks."""
    n = len(evaluation.generators)
    if n == 0:
        raise RankingError("evaluation matrix has no generators")
    plus = tuple(sorted(purpose.desired_weights))
    minus = tuple(sorted(purpose.undesired_weights))
    columns: dict[str, list[int]] = {}
    for metric in sorted(set(plus) | set(minus)):
        values = evaluation.column(metric)
        try:
            classification = purpose.classifications[metric]
        except KeyError:
            raise RankingError(f"metric {metric} has no classification") from None
        columns[metric] = inverted_ranks(values, classification)

    def stack(metrics: tuple[str, ...]) -> np.ndarray:
        out = np.zeros((n, len(metrics)), dtype=np.int64)
        for j, m in enumerate(metrics):
            out[:, j] = columns[m]
        out.flags.writeable = False
        return out

    return TransformedMatrices(
        purpose.purpose, evaluation.generators, plus, minus, stack(plus), stack(minus)
    )


@dataclass(frozen=True)
class RankEntry:
    generator: str
    desired_score: float
    undesired_score: float
    overall_score: float
    rank: int

    def to_json(self) -> dict[str, Any]:
        return {
            "generator": self.generator,
            "desired_score": self.desired_score,
            "undesired_score": self.undesired_score,
            "overall_score": self.overall_score,
            "rank": self.rank,
        }


@dataclass(frozen=True)
class RankingResult:
    purpose: str
    entries: tuple[RankEntry, ...] = field(default_factory=tuple)

    def ranks(self) -> dict[str, int]:
        return {e.generator: e.rank for e in self.entries}

    def scores(self) -> dict[str, float]:
        return {e.generator: e.overall_score for e in self.entries}

    def to_json(self) -> dict[str, Any]:
        return {"purpose": self.purpose, "entries": [e.to_json() for e in self.entries]}

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> RankingResult:
        return cls(
            data["purpose"],
            tuple(
                RankEntry(
                    e["generator"],
                    e["desired_score"],
                    e["undesired_score"],
                    e["overall_score"],
                    e["rank"],
                )
                for e in data["entries"]
            ),
        )


def _weighted_side(
    spec: PurposeSpec, matrix: np.ndarray, metrics: Sequence[str], weights: Mapping[str, float]
) -> list[float]:
    n = matrix.shape[0]
    totals = [0.0] * n
    for j, metric in enumerate(metrics):
        qi_weight = spec.qi_weights.get(spec.qi_of(metric))
        if qi_weight is None:
            raise RankingError(f"metric {metric}: its quality indicator has no weight")
        w = weights[metric] * qi_weight
        for i in range(n):
            totals[i] += float(matrix[i, j]) * w
    return totals


def rank_generators(spec: PurposeSpec, tm: TransformedMatrices) -> RankingResult:
    """Score generators and order them best-first with competition ranks."""
    desired = _weighted_side(spec, tm.e_plus, tm.plus_metrics, spec.desired_weights)
    undesired = _weighted_side(spec, tm.e_minus, tm.minus_metrics, spec.undesired_weights)
    overall = [d - u for d, u in zip(desired, undesired)]
    ranks = competition_ranks([-s for s in overall])
    # list order: rank, then registration order inside a tie group
    order = sorted(range(len(overall)), key=lambda i: (ranks[i], i))
    entries = tuple(
        RankEntry(tm.generators[i], desired[i], undesired[i], overall[i], ranks[i]) for i in order
    )
    return RankingResult(spec.purpose, entries)


def rank_all_purposes(
    specs: Iterable[PurposeSpec], evaluation: EvaluationMatrix
) -> dict[str, RankingResult]:
    results: dict[str, RankingResult] = {}
    for spec in specs:
        problems = validate_purpose_spec(spec)
        if problems:
            raise RankingError(f"purpose {spec.purpose}: " + "; ".join(map(str, problems)))
        try:
            results[spec.purpose] = rank_generators(spec, transform(spec, evaluation))
        except RankingError as exc:
            raise RankingError(f"purpose {spec.purpose}: {exc}") from exc
    return results
