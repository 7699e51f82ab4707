"""Difficulty augmentation by note concatenation.

A configured fraction of the training set is consumed in disjoint
pairs; each pair becomes one composite note whose second half has all
evidence line indices shifted past the first half. Labels appearing in
both halves merge into one assignment with the union of (adjusted)
evidence lines.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from ..hashing import content_hash
from ..metrics.matching import Assignment, normalize_icd_lenient

DEFAULT_FRACTION = 0.30


@dataclass(frozen=True)
class LabeledNote:
    """A chart with its assignments, the unit augmentation works on."""

    chart_id: str
    lines: tuple[str, ...]
    assignments: tuple[Assignment, ...]
    origin_chart_ids: tuple[str, ...] = ()

    @staticmethod
    def make(chart_id, lines, assignments, origin_chart_ids=None) -> "LabeledNote":
        return LabeledNote(
            chart_id=chart_id,
            lines=tuple(lines),
            assignments=tuple(assignments),
            origin_chart_ids=tuple(origin_chart_ids or (chart_id,)),
        )


@dataclass
class AugmentResult:
    notes: list[LabeledNote]
    composites: list[LabeledNote]
    target_pairs: int
    consumed_ids: list[str]
    unpairable_ids: list[str]
    underfilled: bool


def compose_pair(a: LabeledNote, b: LabeledNote) -> LabeledNote:
    """Concatenate two notes, offsetting and merging the second's labels."""
    offset = len(a.lines)
    merged: dict[str, Assignment] = {}
    order: list[str] = []
    for item in a.assignments:
        key = normalize_icd_lenient(item.code)
        merged[key] = item
        order.append(key)
    for item in b.assignments:
        key = normalize_icd_lenient(item.code)
        shifted = frozenset(i + offset for i in item.evidence_lines)
        if key in merged:
            prior = merged[key]
            merged[key] = Assignment(
                prior.code, prior.evidence_lines | shifted, prior.rationale
            )
        else:
            merged[key] = Assignment(item.code, shifted, item.rationale)
            order.append(key)
    return LabeledNote(
        chart_id="aug-" + content_hash(a.chart_id, b.chart_id)[:16],
        lines=a.lines + b.lines,
        assignments=tuple(merged[key] for key in order),
        origin_chart_ids=a.origin_chart_ids + b.origin_chart_ids,
    )


def augment(
    notes,
    fraction: float = DEFAULT_FRACTION,
    seed: int = 0,
    max_len: int = 8192,
    token_count_of=None,
    mode: str = "replace",
) -> AugmentResult:
    """Pair up a fraction of the notes into composites.

    `token_count_of` measures a candidate composite's rendered length;
    pairs that would overflow `max_len` are skipped and the first
    member tries the next partner. When the pool runs out before the
    pair target is met the result is marked underfilled rather than
    failing. `mode` is "replace" (paired originals drop out) or "add"
    (composites appended, originals kept).
    """
    if mode not in ("replace", "add"):
        raise ValueError(f"mode must be 'replace' or 'add', got {mode!r}")
    notes = list(notes)
    target_pairs = math.floor(len(notes) * fraction / 2)
    rng = random.Random(seed)
    pool = list(range(len(notes)))
    rng.shuffle(pool)

    def feasible(a: LabeledNote, b: LabeledNote) -> LabeledNote | None:
        composite = compose_pair(a, b)
        if token_count_of is not None and token_count_of(composite) > max_len:
            return None
        return composite

    composites: list[LabeledNote] = []
    consumed: set[int] = set()
    unpairable: list[int] = []
    while len(composites) < target_pairs and len(pool) >= 2:
        first = pool.pop(0)
        match_pos = None
        composite = None
        for pos, second in enumerate(pool):
            composite = feasible(notes[first], notes[second])
            if composite is not None:
                match_pos = pos
                break
        if match_pos is None:
            unpairable.append(first)
            continue
        second = pool.pop(match_pos)
        consumed.update((first, second))
        composites.append(composite)

    if mode == "replace":
        kept = [note for idx, note in enumerate(notes) if idx not in consumed]
    else:
        kept = list(notes)
    return AugmentResult(
        notes=kept + composites,
        composites=composites,
        target_pairs=target_pairs,
        consumed_ids=sorted(notes[idx].chart_id for idx in consumed),
        unpairable_ids=sorted(notes[idx].chart_id for idx in unpairable),
        underfilled=len(composites) < target_pairs,
    )
