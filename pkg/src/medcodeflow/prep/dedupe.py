"""Near-duplicate chart removal.

Similarity is Jaccard overlap of 5-character shingles over the
newline-joined note text. Charts are visited in chart_id order and
compared against everything already kept, so the survivor of a
duplicate cluster is always its lexicographically first member.
"""

from __future__ import annotations

from dataclasses import dataclass

SHINGLE_SIZE = 5
DEFAULT_THRESHOLD = 0.85


@dataclass
class DedupeResult:
    kept: list
    removed: list[dict]


def shingles(text: str, size: int = SHINGLE_SIZE) -> frozenset[str]:
    """Character shingle set; short texts collapse to a single shingle."""
    if len(text) <= size:
        return frozenset({text}) if text else frozenset()
    return frozenset(text[i : i + size] for i in range(len(text) - size + 1))


def shingle_jaccard(a: frozenset[str], b: frozenset[str]) -> float:
    if not a and not b:
        return 1.0
    union = len(a | b)
    return len(a & b) / union


def dedupe(charts, threshold: float = DEFAULT_THRESHOLD) -> DedupeResult:
    """Drop charts whose similarity to an earlier-kept chart reaches threshold.

    `charts` is an iterable of objects with `chart_id` and `lines`.
    The removal log records which retained chart each drop duplicated.
    """
    if not 0.0 < threshold <= 1.0:
        raise ValueError(f"threshold must be in (0, 1], got {threshold}")
    ordered = sorted(charts, key=lambda chart: chart.chart_id)
    kept = []
    kept_shingles: list[frozenset[str]] = []
    removed: list[dict] = []
    for chart in ordered:
        sh = shingles("\n".join(chart.lines))
        duplicate_of = None
        similarity = 0.0
        for other, other_sh in zip(kept, kept_shingles):
            score = shingle_jaccard(sh, other_sh)
            if score >= threshold:
                duplicate_of = other.chart_id
                similarity = score
                break
        if duplicate_of is None:
            kept.append(chart)
            kept_shingles.append(sh)
        else:
            removed.append(
                {
                    "removed": chart.chart_id,
                    "kept": duplicate_of,
                    "similarity": similarity,
                }
            )
    return DedupeResult(kept=kept, removed=removed)
