"""Rank correlation and the two baseline scorers the ranking is compared to."""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from .ranking import (
    TOLERANCE,
    EvaluationMatrix,
    MetricClassification,
    MetricKind,
    RankingError,
    RankingResult,
    competition_ranks,
)


@dataclass(frozen=True)
class RankVector:
    labels: tuple[str, ...]
    ranks: tuple[int, ...]

    def __post_init__(self):
        labels, ranks = tuple(self.labels), tuple(int(r) for r in self.ranks)
        if len(labels) != len(ranks):
            raise ValueError("labels and ranks differ in length")
        if len(set(labels)) != len(labels):
            raise ValueError("duplicate labels")
        if any(r < 1 for r in ranks):
            raise ValueError("ranks must be >= 1")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "ranks", ranks)

    @classmethod
    def from_mapping(cls, ranks: Mapping[str, int]) -> RankVector:
        return cls(tuple(ranks), tuple(ranks.values()))

    @classmethod
    def from_result(cls, result: RankingResult) -> RankVector:
        return cls.from_mapping(result.ranks())

    def as_dict(self) -> dict[str, int]:
        return dict(zip(self.labels, self.ranks))


def _aligned(a: RankVector, b: RankVector) -> tuple[np.ndarray, np.ndarray]:
    if set(a.labels) != set(b.labels):
        raise ValueError(
            f"label sets differ: {sorted(set(a.labels) ^ set(b.labels))}"
        )
    lookup = b.as_dict()
    return (
        np.array(a.ranks, dtype=float),
        np.array([lookup[label] for label in a.labels], dtype=float),
    )


def kendall_tau(a: RankVector, b: RankVector) -> float:
    """Kendall's tau-b.

    Concordant minus discordant pairs over the tie-corrected pair count; with
    no ties the denominator is n(n-1)/2. Returns nan if either vector is
    entirely tied.
    """
    x, y = _aligned(a, b)
    n = len(x)
    concordant = discordant = ties_x = ties_y = 0
    for i in range(n):
        for j in range(i + 1, n):
            dx, dy = x[i] - x[j], y[i] - y[j]
            if dx == 0 and dy == 0:
                ties_x += 1
                ties_y += 1
            elif dx == 0:
                ties_x += 1
            elif dy == 0:
                ties_y += 1
            elif dx * dy > 0:
                concordant += 1
            else:
                discordant += 1
    pairs = n * (n - 1) // 2
    denom = np.sqrt(float(pairs - ties_x) * float(pairs - ties_y))
    if denom == 0:
        return float("nan")
    return float((concordant - discordant) / denom)


def _average_ranks(v: np.ndarray) -> np.ndarray:
    order = np.argsort(v, kind="stable")
    out = np.empty(len(v), dtype=float)
    sorted_v = v[order]
    i = 0
    while i < len(v):
        j = i
        while j + 1 < len(v) and sorted_v[j + 1] == sorted_v[i]:
            j += 1
        out[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return out


def spearman_rho(a: RankVector, b: RankVector) -> float:
    """Spearman's rho as the Pearson correlation of average ranks.

    For tie-free inputs this is exactly 1 - 6*sum(d^2) / (n(n^2-1)).
    """
    x, y = _aligned(a, b)
    if len(x) < 2:
        raise ValueError("spearman_rho needs at least two observations")
    rx, ry = _average_ranks(x), _average_ranks(y)
    rx -= rx.mean()
    ry -= ry.mean()
    denom = np.sqrt((rx * rx).sum() * (ry * ry).sum())
    if denom == 0:
        return float("nan")
    return float((rx * ry).sum() / denom)


def _check_weights(evaluation: EvaluationMatrix, weights: Mapping[str, float]):
    unknown = sorted(set(weights) - set(evaluation.metrics))
    if unknown:
        raise RankingError(f"unknown metric(s): {', '.join(unknown)}")
    total = sum(weights.values())
    if abs(total - 1.0) > TOLERANCE:
        raise ValueError(f"weights sum {total:g} ≠ 1")
    if not evaluation.generators:
        raise RankingError("evaluation matrix has no generators")


def _classification(classifications, metric) -> MetricClassification:
    try:
        return classifications[metric]
    except KeyError:
        raise RankingError(f"metric {metric} has no classification") from None


def normalize_column(
    values: np.ndarray, classification: MetricClassification, method: str = "max"
) -> np.ndarray:
    """Orient one metric column so that larger means better.

    ``max`` scales by the largest absolute value and negates lower-is-better
    columns; closer-to-constant columns are treated as higher-is-better, the
    baseline only knowing two directions. ``minmax`` maps to [0, 1] with 1 the
    best value, closer-to-constant by distance to the constant. Degenerate
    columns map to all ones.
    """
    v = np.asarray(values, dtype=float)
    kind = classification.kind
    if method == "max":
        scale = np.abs(v).max()
        if scale == 0:
            return np.ones_like(v)
        scaled = v / scale
        return -scaled if kind is MetricKind.LOWER_BETTER else scaled
    if method == "minmax":
        if kind is MetricKind.CLOSER_TO_CONSTANT:
            dist = np.abs(v - classification.constant)
            far = dist.max()
            return np.ones_like(v) if far == 0 else 1.0 - dist / far
        lo, hi = v.min(), v.max()
        if hi - lo == 0:
            return np.ones_like(v)
        if kind is MetricKind.HIGHER_BETTER:
            return (v - lo) / (hi - lo)
        return (hi - v) / (hi - lo)
    raise ValueError(f"unknown normalization {method!r}")


def baseline_weighted_normalized_average(
    evaluation: EvaluationMatrix,
    weights: Mapping[str, float],
    classifications: Mapping[str, MetricClassification],
    normalization: str = "max",
) -> RankVector:
    _check_weights(evaluation, weights)
    score = np.zeros(len(evaluation.generators))
    for metric in sorted(weights):
        cls = _classification(classifications, metric)
        score += weights[metric] * normalize_column(evaluation.column(metric), cls, normalization)
    ranks = competition_ranks([-s for s in score])
    return RankVector(evaluation.generators, ranks)


def baseline_weighted_rank_derived(
    evaluation: EvaluationMatrix,
    weights: Mapping[str, float],
    classifications: Mapping[str, MetricClassification],
) -> RankVector:
    _check_weights(evaluation, weights)
    mean_rank = np.zeros(len(evaluation.generators))
    for metric in sorted(weights):
        cls = _classification(classifications, metric)
        per_metric = competition_ranks([cls.sort_key(v) for v in evaluation.column(metric)])
        mean_rank += weights[metric] * np.asarray(per_metric, dtype=float)
    return RankVector(evaluation.generators, competition_ranks(list(mean_rank)))


def correlations(a: RankVector, b: RankVector) -> tuple[float, float]:
    return kendall_tau(a, b), spearman_rho(a, b)
