"""Hierarchical evaluation metrics for code assignment.

Documents are compared at five levels: category prefix (level 0), 4- and
5-character prefixes (1, 2), full code (3), and full code plus evidence
line overlap (4). Procedure codes are flat and use exact set matching.
Corpus aggregation is macro (per-document mean) with micro counts
emitted as a diagnostic.
"""

from .matching import (
    Assignment,
    DocEval,
    DocPair,
    LevelCounts,
    cpt_set_match,
    dedupe_assignments,
    doc_prf,
    evaluate_document,
    evaluate_corpus,
    evidence_jaccard,
    match_level,
)
from .aggregate import (
    CodeRow,
    aggregate_corpus,
    per_category_rows,
    per_code_rows,
    pool_weighted_moments,
    response_quality,
    weighted_domain_aggregate,
    weighted_stats,
)
from .outliers import OutlierReport, iqr_outliers, quantile_linear
from .frequency import FrequencyRow, frequency_analysis
from .report import build_eval_report, write_report_files

__all__ = [
    "Assignment",
    "DocEval",
    "DocPair",
    "LevelCounts",
    "match_level",
    "cpt_set_match",
    "dedupe_assignments",
    "doc_prf",
    "evidence_jaccard",
    "evaluate_document",
    "evaluate_corpus",
    "CodeRow",
    "aggregate_corpus",
    "response_quality",
    "per_code_rows",
    "per_category_rows",
    "weighted_stats",
    "weighted_domain_aggregate",
    "pool_weighted_moments",
    "OutlierReport",
    "iqr_outliers",
    "quantile_linear",
    "FrequencyRow",
    "frequency_analysis",
    "build_eval_report",
    "write_report_files",
]
