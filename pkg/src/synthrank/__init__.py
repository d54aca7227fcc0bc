"""Rank synthetic data generators per purpose on a replicated, auditable ledger."""

from .analytics import (
    RankVector,
    baseline_weighted_normalized_average,
    baseline_weighted_rank_derived,
    kendall_tau,
    spearman_rho,
)
from .ranking import (
    EvaluationMatrix,
    MetricClassification,
    MetricKind,
    PurposeSpec,
    QualityIndicator,
    RankingError,
    RankingResult,
    TransformedMatrices,
    rank_all_purposes,
    rank_generators,
    transform,
    validate_purpose_spec,
)

__version__ = "0.1.0"

__all__ = [
    "EvaluationMatrix",
    "MetricClassification",
    "MetricKind",
    "PurposeSpec",
    "QualityIndicator",
    "RankVector",
    "RankingError",
    "RankingResult",
    "TransformedMatrices",
    "baseline_weighted_normalized_average",
    "baseline_weighted_rank_derived",
    "kendall_tau",
    "rank_all_purposes",
    "rank_generators",
    "spearman_rho",
    "transform",
    "validate_purpose_spec",
]
