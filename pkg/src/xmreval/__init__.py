"""Evaluation tools for cross-modal retrieval benchmarks with many positives per query."""

from .annotations import (
    AnnotationRecord,
    DatasetBundle,
    GroundTruth,
    Judgment,
    Modality,
    dataset_precision_recall,
    filter_invalid,
    load_bundle,
    merge_positive_sources,
)
from .correlation import ScoreTable, correlation_matrix, cross_model_rank, kendall_tau_b
from .metrics import (
    CreditMode,
    MatchVector,
    MetricSpec,
    evaluate,
    map_at_r,
    match_vector,
    plausible_match,
    pmrp,
    r_precision,
    recall_at_k,
)
from .mitl import bias_curve, bias_quantity, package_hits, pool_candidates
from .preference import PreferenceMatrix, fit_bradley_terry
from .ranking import RankedList, SimilarityMatrix, rank_gallery, topk

__version__ = "0.1.0"

__all__ = [
    "AnnotationRecord",
    "CreditMode",
    "DatasetBundle",
    "GroundTruth",
    "Judgment",
    "MatchVector",
    "MetricSpec",
    "Modality",
    "PreferenceMatrix",
    "RankedList",
    "ScoreTable",
    "SimilarityMatrix",
    "bias_curve",
    "bias_quantity",
    "correlation_matrix",
    "cross_model_rank",
    "dataset_precision_recall",
    "evaluate",
    "filter_invalid",
    "fit_bradley_terry",
    "kendall_tau_b",
    "load_bundle",
    "map_at_r",
    "match_vector",
    "merge_positive_sources",
    "package_hits",
    "plausible_match",
    "pmrp",
    "pool_candidates",
    "r_precision",
    "rank_gallery",
    "recall_at_k",
    "topk",
]
