"""Interquartile-range screening for underperforming code groups.

Groups with too few evaluation cases are excluded so that a category
seen a handful of times cannot dominate the quartiles. When fewer than
four groups survive the case threshold the quartiles are meaningless
and the screen reports a warning instead of flags.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .aggregate import CodeRow

MIN_ELIGIBLE_GROUPS = 4


@dataclass
class OutlierReport:
    flagged: list[CodeRow]
    eligible: list[CodeRow]
    q1: float | None
    q3: float | None
    lower_bound: float | None
    eligible_count: int
    warning: str | None


def quantile_linear(sorted_values, q: float) -> float:
    """Quantile with linear interpolation at rank (n - 1) * q."""
    if not sorted_values:
        raise ValueError("no values")
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"quantile must be in [0, 1], got {q}")
    rank = (len(sorted_values) - 1) * q
    low = math.floor(rank)
    high = math.ceil(rank)
    if low == high:
        return sorted_values[low]
    frac = rank - low
    # a + f*(b - a) stays inside [a, b] in floating point; the
    # (1-f)*a + f*b form can escape the interval by one ulp
    return sorted_values[low] + frac * (sorted_values[high] - sorted_values[low])


def iqr_outliers(
    rows: list[CodeRow], min_cases: int = 10, k: float = 1.5
) -> OutlierReport:
    """Flag groups whose F1 falls below Q1 - k * IQR.

    Only the low side is screened; the goal is finding groups the
    pipeline handles badly, not unusually easy ones.
    """
    eligible = [row for row in rows if row.n_cases >= min_cases]
    if len(eligible) < MIN_ELIGIBLE_GROUPS:
        return OutlierReport(
            flagged=[],
            eligible=eligible,
            q1=None,
            q3=None,
            lower_bound=None,
            eligible_count=len(eligible),
            warning=(
                f"only {len(eligible)} groups have at least {min_cases} cases; "
                f"need {MIN_ELIGIBLE_GROUPS} for a stable quartile estimate"
            ),
        )
    scores = sorted(row.f1 for row in eligible)
    q1 = quantile_linear(scores, 0.25)
    q3 = quantile_linear(scores, 0.75)
    bound = q1 - k * (q3 - q1)
    flagged = sorted(
        (row for row in eligible if row.f1 < bound), key=lambda row: (row.f1, row.key)
    )
    return OutlierReport(
        flagged=flagged,
        eligible=eligible,
        q1=q1,
        q3=q3,
        lower_bound=bound,
        eligible_count=len(eligible),
        warning=None,
    )
