"""Relating evaluation scores to training-set frequency.

Codes the model rarely saw in training tend to score worse; bucketing
training counts into powers of two makes that curve visible without
choosing arbitrary bin edges. Counts of zero get their own bin because
"never seen" is qualitatively different from "seen once".
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from statistics import fmean

from .aggregate import CodeRow


@dataclass(frozen=True)
class FrequencyRow:
    key: str
    train_count: int
    f1: float
    bin_low: int
    bin_high: int


def bin_bounds(count: int) -> tuple[int, int]:
    """Inclusive power-of-two bucket for a training count."""
    if count <= 0:
        return 0, 0
    low = 1
    while low * 2 <= count:
        low *= 2
    return low, low * 2 - 1


def frequency_analysis(rows: list[CodeRow], train_counts: dict[str, int]) -> dict:
    """Join eval rows with training counts and summarize per bucket."""
    out_rows: list[FrequencyRow] = []
    for row in rows:
        count = int(train_counts.get(row.key, 0))
        low, high = bin_bounds(count)
        out_rows.append(FrequencyRow(row.key, count, row.f1, low, high))
    grouped: dict[tuple[int, int], list[float]] = defaultdict(list)
    for row in out_rows:
        grouped[(row.bin_low, row.bin_high)].append(row.f1)
    bins = [
        {
            "low": low,
            "high": high,
            "n": len(scores),
            "f1_mean": fmean(scores),
            "f1_min": min(scores),
            "f1_max": max(scores),
        }
        for (low, high), scores in sorted(grouped.items())
    ]
    return {"rows": out_rows, "bins": bins}
