"""Corpus-level aggregation of per-document scores.

Macro scores (per-document means) are the primary numbers; micro
scores from pooled counts are kept as a diagnostic because they hide
small documents. Group rows are combined by case-count weighting, with
spreads pooled through the law of total variance so that re-combining
subgroup rows reproduces the spread of the pooled population.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from statistics import fmean

from .matching import (
    DocEval,
    DocPair,
    dedupe_assignments,
    doc_prf,
    normalize_icd_lenient,
)
from ..taxonomy import truncate_to_level


@dataclass(frozen=True)
class CodeRow:
    """Binary per-document retrieval stats for one code or prefix."""

    key: str
    n_cases: int
    pred_cases: int
    true_pos: int
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class GroupStats:
    """Mean and spread of document scores inside one group of charts."""

    name: str
    n_cases: int
    precision: float
    recall: float
    f1: float
    precision_std: float | None = None
    recall_std: float | None = None
    f1_std: float | None = None


def aggregate_corpus(doc_evals: list[DocEval]) -> dict[str, dict]:
    """Macro and micro precision/recall/F1 per level."""
    if not doc_evals:
        return {}
    table: dict[str, dict] = {}
    for key in doc_evals[0].levels:
        per_doc = [doc.scores[key] for doc in doc_evals]
        macro = {
            "precision": fmean(s[0] for s in per_doc),
            "recall": fmean(s[1] for s in per_doc),
            "f1": fmean(s[2] for s in per_doc),
        }
        tp = sum(doc.levels[key].true_pos for doc in doc_evals)
        pred = sum(doc.levels[key].pred_count for doc in doc_evals)
        gold = sum(doc.levels[key].gold_count for doc in doc_evals)
        mp, mr, mf = doc_prf(tp, pred, gold)
        table[key] = {
            "macro": macro,
            "micro": {"precision": mp, "recall": mr, "f1": mf},
            "counts": {"true_pos": tp, "pred_count": pred, "gold_count": gold},
        }
    return table


def response_quality(doc_evals: list[DocEval]) -> float:
    """Fraction of documents with an empty prediction list."""
    if not doc_evals:
        return 0.0
    return sum(doc.empty_prediction for doc in doc_evals) / len(doc_evals)


def evidence_jaccard_mean(doc_evals: list[DocEval]) -> float | None:
    values = [doc.jaccard_mean for doc in doc_evals if doc.jaccard_mean is not None]
    if not values:
        return None
    return fmean(values)


def per_code_rows(
    pairs: list[DocPair],
    level: int | None = 3,
    normalize=normalize_icd_lenient,
) -> list[CodeRow]:
    """Per-key document retrieval table.

    A key is counted once per document per side regardless of how many
    codes collapse onto it. `level` of None keeps full codes, which is
    the only option for flat procedure codes.
    """

    def keys(assignments):
        deduped, _ = dedupe_assignments(assignments, normalize)
        if level is None:
            return {a.code for a in deduped}
        return {truncate_to_level(a.code, level) for a in deduped}

    gold_docs: dict[str, int] = defaultdict(int)
    pred_docs: dict[str, int] = defaultdict(int)
    hit_docs: dict[str, int] = defaultdict(int)
    for pair in pairs:
        gold_keys = keys(pair.gold)
        pred_keys = keys(pair.pred)
        for key in gold_keys:
            gold_docs[key] += 1
        for key in pred_keys:
            pred_docs[key] += 1
        for key in gold_keys & pred_keys:
            hit_docs[key] += 1
    rows = []
    for key in sorted(set(gold_docs) | set(pred_docs)):
        tp = hit_docs[key]
        precision, recall, f1 = doc_prf(tp, pred_docs[key], gold_docs[key])
        rows.append(
            CodeRow(key, gold_docs[key], pred_docs[key], tp, precision, recall, f1)
        )
    return rows


def per_category_rows(pairs: list[DocPair]) -> list[CodeRow]:
    return per_code_rows(pairs, level=0)


def weighted_stats(values, weights) -> tuple[float, float]:
    """Weighted mean and population-style weighted standard deviation."""
    values = list(values)
    weights = list(weights)
    total = sum(weights)
    if total <= 0:
        raise ValueError("weights must sum to a positive value")
    mean = sum(v * w for v, w in zip(values, weights)) / total
    var = sum(w * (v - mean) ** 2 for v, w in zip(values, weights)) / total
    return mean, math.sqrt(var)


def pool_weighted_moments(rows) -> tuple[float, float, int]:
    """Combine (mean, std, n) triples into pooled mean, std and n.

    The pooled variance is the weighted within-group variance plus the
    weighted variance of the group means, so the result matches what a
    direct computation over the concatenated samples would give.
    """
    rows = list(rows)
    total = sum(n for _, _, n in rows)
    if total <= 0:
        raise ValueError("pooled count must be positive")
    mean = sum(m * n for m, _, n in rows) / total
    second_moment = sum(n * (s * s + m * m) for m, s, n in rows) / total
    var = max(second_moment - mean * mean, 0.0)
    return mean, math.sqrt(var), total


def group_stats(name: str, score_triples) -> GroupStats:
    """Summarize per-document (precision, recall, f1) triples."""
    triples = list(score_triples)
    if not triples:
        raise ValueError(f"group {name!r} has no documents")
    columns = list(zip(*triples))
    means = [fmean(col) for col in columns]
    stds = [
        math.sqrt(fmean((v - m) ** 2 for v in col))
        for col, m in zip(columns, means)
    ]
    return GroupStats(
        name,
        len(triples),
        means[0],
        means[1],
        means[2],
        stds[0],
        stds[1],
        stds[2],
    )


def weighted_domain_aggregate(rows: list[GroupStats], name: str = "Combined") -> GroupStats:
    """Case-count weighted combination of group rows.

    Means are weighted by n_cases. Spreads are pooled with the law of
    total variance when every input row carries one, and omitted
    otherwise.
    """
    if not rows:
        raise ValueError("no rows to aggregate")
    total = sum(row.n_cases for row in rows)
    have_stds = all(
        row.precision_std is not None
        and row.recall_std is not None
        and row.f1_std is not None
        for row in rows
    )

    def combine(metric: str, spread: str):
        mean = sum(getattr(r, metric) * r.n_cases for r in rows) / total
        if not have_stds:
            return mean, None
        triples = [(getattr(r, metric), getattr(r, spread), r.n_cases) for r in rows]
        _, std, _ = pool_weighted_moments(triples)
        return mean, std

    precision, precision_std = combine("precision", "precision_std")
    recall, recall_std = combine("recall", "recall_std")
    f1, f1_std = combine("f1", "f1_std")
    return GroupStats(
        name, total, precision, recall, f1, precision_std, recall_std, f1_std
    )
