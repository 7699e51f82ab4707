"""Domain filtering and chart-level evaluation against expert labels.

Predictions are first narrowed to the clinical domains under study
(category-range membership, ranges shipped as data), then scored per
chart at hierarchy levels 0 through 3 with the same matching code the
corpus evaluation uses. Results are reported as mean with standard
error across charts.
"""

from __future__ import annotations

import math
import statistics
from pathlib import Path

from ..jsonl import load_json
from ..metrics import Assignment, doc_prf, match_level
from ..metrics.matching import normalize_icd_lenient

_CATEGORY_FILE = Path(__file__).parent.parent / "data" / "domain_categories.json"

EXPERT_LEVELS = (0, 1, 2, 3)


def load_domain_categories(path: str | Path = _CATEGORY_FILE) -> dict[str, list[tuple[str, str]]]:
    raw = load_json(path)
    return {
        domain: [(start, end) for start, end in ranges]
        for domain, ranges in raw.items()
    }


def _in_domain(code: str, domain_sets: dict[str, list[tuple[str, str]]]) -> str | None:
    category = normalize_icd_lenient(code)[:3]
    for domain, ranges in domain_sets.items():
        if any(start <= category <= end for start, end in ranges):
            return domain
    return None


def filter_domain(
    records: list[dict], domain_sets: dict[str, list[tuple[str, str]]]
) -> tuple[list[dict], dict]:
    """Keep predictions whose category falls in any configured domain.

    Returns the filtered records plus an accounting summary: how many
    predictions each domain retained and how many were dropped.
    """
    retained_by_domain: dict[str, int] = {domain: 0 for domain in domain_sets}
    removed = 0
    filtered = []
    for rec in records:
        kept = []
        for assignment in rec["assignments"]:
            domain = _in_domain(assignment["code"], domain_sets)
            if domain is None:
                removed += 1
                continue
            retained_by_domain[domain] += 1
            kept.append(assignment)
        filtered.append({"chart_id": rec["chart_id"], "assignments": kept})
    summary = {"removed": removed, "retained_by_domain": retained_by_domain}
    return filtered, summary


def _as_assignments(assignments: list[dict]) -> tuple[Assignment, ...]:
    return tuple(
        Assignment.make(a["code"], a.get("evidence_lines", ())) for a in assignments
    )


def mean_sem(values: list[float]) -> dict[str, float]:
    """Mean and standard error (sample std over sqrt n); SEM 0 for n < 2."""
    if not values:
        return {"mean": 0.0, "sem": 0.0}
    mean = statistics.fmean(values)
    sem = statistics.stdev(values) / math.sqrt(len(values)) if len(values) > 1 else 0.0
    return {"mean": mean, "sem": sem}


def evaluate_expert(
    pred_records: list[dict],
    expert_records: list[dict],
    levels: tuple[int, ...] = EXPERT_LEVELS,
) -> dict:
    """Chart-level precision, recall, and F1 against expert ground truth.

    The reviewed charts define the evaluation universe: a chart with no
    prediction record scores as an empty prediction, and predictions
    for unreviewed charts are ignored.
    """
    preds_of = {rec["chart_id"]: rec["assignments"] for rec in pred_records}
    per_level: dict[str, dict[str, list[float]]] = {
        str(level): {"precision": [], "recall": [], "f1": []} for level in levels
    }
    for rec in expert_records:
        pred = _as_assignments(preds_of.get(rec["chart_id"], []))
        gold = _as_assignments(rec["assignments"])
        for level in levels:
            counts = match_level(pred, gold, level)
            p, r, f1 = doc_prf(counts.true_pos, counts.pred_count, counts.gold_count)
            per_level[str(level)]["precision"].append(p)
            per_level[str(level)]["recall"].append(r)
            per_level[str(level)]["f1"].append(f1)
    return {
        "schema": "medcodeflow/expert-eval/v1",
        "n_charts": len(expert_records),
        "levels": {
            level: {metric: mean_sem(values) for metric, values in metrics.items()}
            for level, metrics in per_level.items()
        },
    }
