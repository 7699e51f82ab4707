"""Document-level matching between predicted and gold code assignments.

Matching is computed after deduplicating each side on the full
normalized code. At prefix levels the true-positive count is the size
of the multiset intersection of truncated codes, which equals the
maximum one-to-one pairing under prefix equality. At the evidence
level a pair must agree on the full code and share at least one
evidence line.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

from ..errors import CatalogDriftError, MalformedCode
from ..taxonomy import parse_cpt, parse_icd, truncate_to_level

FULL_CODE_LEVEL = 3
EVIDENCE_LEVEL = 4
ICD_LEVELS = (0, 1, 2, 3, 4)


@dataclass(frozen=True)
class Assignment:
    """One code attached to a document, with optional line evidence."""

    code: str
    evidence_lines: frozenset[int] = frozenset()
    rationale: str = ""

    @staticmethod
    def make(code: str, evidence_lines=(), rationale: str = "") -> "Assignment":
        return Assignment(code, frozenset(int(i) for i in evidence_lines), rationale)


@dataclass(frozen=True)
class DocPair:
    """Predicted and gold assignments for one chart."""

    chart_id: str
    pred: tuple[Assignment, ...]
    gold: tuple[Assignment, ...]


@dataclass(frozen=True)
class LevelCounts:
    true_pos: int
    pred_count: int
    gold_count: int


@dataclass
class DocEval:
    """Per-document match counts and derived scores, keyed by level."""

    chart_id: str
    levels: dict[str, LevelCounts]
    scores: dict[str, tuple[float, float, float]]
    jaccard_mean: float | None
    empty_prediction: bool
    duplicate_pred_codes: int


def normalize_icd_lenient(code: str) -> str:
    """Normalized form for matching; invalid input falls back to a raw key.

    Predictions are schema-validated upstream, but evaluation must not
    crash on a stray malformed code. Such codes keep an uppercased,
    dotless key so they count against precision without ever matching.
    """
    try:
        return parse_icd(code).normalized
    except MalformedCode:
        return code.strip().upper().replace(".", "")


def dedupe_assignments(
    assignments, normalize=normalize_icd_lenient
) -> tuple[list[Assignment], int]:
    """Collapse repeats of the same full code, unioning their evidence.

    Returns the deduplicated list (first-seen order, codes in normalized
    form) and the number of collapsed duplicates.
    """
    order: list[str] = []
    evidence: dict[str, set[int]] = {}
    rationales: dict[str, str] = {}
    duplicates = 0
    for item in assignments:
        key = normalize(item.code)
        if key in evidence:
            duplicates += 1
            evidence[key] |= item.evidence_lines
        else:
            order.append(key)
            evidence[key] = set(item.evidence_lines)
            rationales[key] = item.rationale
    deduped = [
        Assignment(code, frozenset(evidence[code]), rationales[code]) for code in order
    ]
    return deduped, duplicates


def match_level(pred, gold, level: int) -> LevelCounts:
    """Count true positives at one prefix level (0..3).

    Both sides are deduplicated on the full code first, so a code that
    appears twice in a prediction cannot earn two category hits. The
    multiset intersection of truncations then gives the size of the
    largest one-to-one pairing whose pairs agree on the level prefix.
    """
    pred_d, _ = dedupe_assignments(pred)
    gold_d, _ = dedupe_assignments(gold)
    pred_keys = Counter(truncate_to_level(a.code, level) for a in pred_d)
    gold_keys = Counter(truncate_to_level(a.code, level) for a in gold_d)
    tp = sum((pred_keys & gold_keys).values())
    return LevelCounts(tp, len(pred_d), len(gold_d))


def match_evidence_level(pred, gold) -> tuple[LevelCounts, float | None]:
    """Full-code matches that also share an evidence line.

    Returns the counts and the mean evidence Jaccard over full-code
    matches (None when there are no such matches).
    """
    pred_d, _ = dedupe_assignments(pred)
    gold_d, _ = dedupe_assignments(gold)
    gold_by_code = {a.code: a for a in gold_d}
    tp = 0
    jaccards: list[float] = []
    for item in pred_d:
        partner = gold_by_code.get(item.code)
        if partner is None:
            continue
        jaccards.append(evidence_jaccard(item.evidence_lines, partner.evidence_lines))
        if item.evidence_lines & partner.evidence_lines:
            tp += 1
    counts = LevelCounts(tp, len(pred_d), len(gold_d))
    mean = sum(jaccards) / len(jaccards) if jaccards else None
    return counts, mean


def evidence_jaccard(a, b) -> float:
    """Jaccard overlap of two evidence line sets; two empty sets count as 1."""
    sa, sb = set(a), set(b)
    if not sa and not sb:
        return 1.0
    union = len(sa | sb)
    return len(sa & sb) / union


def doc_prf(true_pos: int, pred_count: int, gold_count: int) -> tuple[float, float, float]:
    """Precision, recall, F1 for one document.

    An empty prediction against an empty gold set is a vacuous success
    (all three are 1). An empty prediction against a non-empty gold set
    scores zero precision rather than undefined.
    """
    if pred_count == 0:
        precision = 1.0 if gold_count == 0 else 0.0
    else:
        precision = true_pos / pred_count
    recall = 1.0 if gold_count == 0 else true_pos / gold_count
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return precision, recall, f1


def evaluate_document(pair: DocPair, levels=ICD_LEVELS) -> DocEval:
    """Score one chart at every requested level."""
    level_counts: dict[str, LevelCounts] = {}
    jaccard_mean: float | None = None
    for level in levels:
        if level == EVIDENCE_LEVEL:
            counts, jaccard_mean = match_evidence_level(pair.pred, pair.gold)
        else:
            counts = match_level(pair.pred, pair.gold, level)
        level_counts[str(level)] = counts
    _, duplicates = dedupe_assignments(pair.pred)
    scores = {
        key: doc_prf(c.true_pos, c.pred_count, c.gold_count)
        for key, c in level_counts.items()
    }
    return DocEval(
        chart_id=pair.chart_id,
        levels=level_counts,
        scores=scores,
        jaccard_mean=jaccard_mean,
        empty_prediction=len(pair.pred) == 0,
        duplicate_pred_codes=duplicates,
    )


def evaluate_corpus(pairs, levels=ICD_LEVELS) -> list[DocEval]:
    return [evaluate_document(pair, levels) for pair in pairs]


def cpt_set_match(
    pred_codes,
    gold_codes,
    pred_catalog_version: str | None = None,
    gold_catalog_version: str | None = None,
) -> LevelCounts:
    """Exact set matching for flat procedure codes.

    Raises CatalogDriftError when both sides declare a catalog version
    and the versions differ; identical code sets scored against
    different catalogs are not comparable.
    """
    if (
        pred_catalog_version is not None
        and gold_catalog_version is not None
        and pred_catalog_version != gold_catalog_version
    ):
        raise CatalogDriftError(
            f"prediction catalog {pred_catalog_version!r} does not match "
            f"gold catalog {gold_catalog_version!r}"
        )
    pred_set = {_normalize_cpt_lenient(c) for c in pred_codes}
    gold_set = {_normalize_cpt_lenient(c) for c in gold_codes}
    return LevelCounts(len(pred_set & gold_set), len(pred_set), len(gold_set))


def _normalize_cpt_lenient(code: str) -> str:
    try:
        return parse_cpt(code).normalized
    except MalformedCode:
        return code.strip().upper()


def evaluate_cpt_document(
    pair: DocPair,
    pred_catalog_version: str | None = None,
    gold_catalog_version: str | None = None,
) -> DocEval:
    """Score one procedure chart with exact set matching."""
    counts = cpt_set_match(
        [a.code for a in pair.pred],
        [a.code for a in pair.gold],
        pred_catalog_version,
        gold_catalog_version,
    )
    scores = {"exact": doc_prf(counts.true_pos, counts.pred_count, counts.gold_count)}
    return DocEval(
        chart_id=pair.chart_id,
        levels={"exact": counts},
        scores=scores,
        jaccard_mean=None,
        empty_prediction=len(pair.pred) == 0,
        duplicate_pred_codes=len(pair.pred) - counts.pred_count,
    )
