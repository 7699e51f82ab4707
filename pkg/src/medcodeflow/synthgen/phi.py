"""Rule-based screening for patient-identifying text.

Three deterministic rules: long digit runs (phone, MRN, SSN shapes,
separators tolerated), date-of-birth statements, and exact matches
against a bundled surname list. Anything flagged is quarantined by the
caller; the filter itself never mutates text. The rules favor recall
on identifier shapes over precision, which is the right trade for a
filter whose false positives only cost one regenerated chart.
"""

from __future__ import annotations

import re
from functools import lru_cache
from pathlib import Path

from ..errors import PhiFilterRejection

_SURNAME_FILE = Path(__file__).parent.parent / "data" / "surnames.txt"

_DIGIT_RUN_RE = re.compile(r"\d(?:[ \-().]?\d){6,}")
_DOB_KEYWORD_RE = re.compile(r"\b(?:dob|date of birth|born on)\b", re.IGNORECASE)
_DATE_RE = re.compile(r"\b\d{1,2}[/-]\d{1,2}[/-](?:\d{4}|\d{2})\b")
_WORD_RE = re.compile(r"[A-Za-z][a-z]+")


@lru_cache(maxsize=1)
def load_surnames(path: str | Path = _SURNAME_FILE) -> frozenset[str]:
    names = set()
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line and not line.startswith("#"):
                names.add(line)
    return frozenset(names)


def phi_findings(text: str, surnames: frozenset[str] | None = None) -> list[dict]:
    """All rule hits in one string; empty list means clean."""
    if surnames is None:
        surnames = load_surnames()
    findings: list[dict] = []
    for match in _DIGIT_RUN_RE.finditer(text):
        findings.append({"rule": "digit_run", "match": match.group(0)})
    if _DOB_KEYWORD_RE.search(text):
        date = _DATE_RE.search(text)
        findings.append(
            {
                "rule": "dob",
                "match": date.group(0) if date else _DOB_KEYWORD_RE.search(text).group(0),
            }
        )
    for word in _WORD_RE.findall(text):
        if word[0].isupper() and word in surnames:
            findings.append({"rule": "surname", "match": word})
    return findings


def screen_lines(lines, context: str, surnames: frozenset[str] | None = None) -> None:
    """Raise PhiFilterRejection if any line trips a rule."""
    findings: list[dict] = []
    for i, line in enumerate(lines):
        for finding in phi_findings(line, surnames):
            findings.append(dict(finding, line_index=i))
    if findings:
        raise PhiFilterRejection(
            f"{context}: {len(findings)} identifying pattern(s) found",
            findings=findings,
        )
