"""Structured prompt blocks.

Pipeline prompts embed candidate codes, note lines, and key=value hints
in a fixed plain-text layout. Builders live here next to the parsers the
mock provider uses, so the two cannot drift apart.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

__all__ = [
    "CodeItem",
    "format_code_item",
    "parse_code_items",
    "format_note_lines",
    "parse_note_lines",
    "format_hint",
    "parse_hints",
]


@dataclass(frozen=True)
class CodeItem:
    code: str
    description: str
    score: float | None = None
    group: int | None = None


_CODE_RE = re.compile(
    r"^- (?P<code>\S+) :: (?P<desc>.*?)"
    r"(?: \(score=(?P<score>-?\d+\.\d+)\))?"
    r"(?: \[group=(?P<group>\d+)\])?$"
)
_LINE_RE = re.compile(r"^\[(?P<idx>\d+)\] (?P<text>.*)$")
_HINT_RE = re.compile(r"^(?P<key>[a-z_]+)=(?P<value>.+)$")


def format_code_item(item: CodeItem) -> str:
    out = f"- {item.code} :: {item.description}"
    if item.score is not None:
        out += f" (score={item.score:.4f})"
    if item.group is not None:
        out += f" [group={item.group}]"
    return out


def parse_code_items(text: str) -> list[CodeItem]:
    items = []
    for line in text.splitlines():
        m = _CODE_RE.match(line.strip())
        if m:
            items.append(
                CodeItem(
                    code=m.group("code"),
                    description=m.group("desc"),
                    score=float(m.group("score")) if m.group("score") else None,
                    group=int(m.group("group")) if m.group("group") else None,
                )
            )
    return items


def format_note_lines(lines: list[str], indices: list[int] | None = None) -> str:
    if indices is None:
        indices = list(range(len(lines)))
    return "\n".join(f"[{i}] {text}" for i, text in zip(indices, lines))


def parse_note_lines(text: str) -> list[tuple[int, str]]:
    out = []
    for line in text.splitlines():
        m = _LINE_RE.match(line.strip())
        if m:
            out.append((int(m.group("idx")), m.group("text")))
    return out


def format_hint(key: str, value) -> str:
    return f"{key}={value}"


def parse_hints(text: str) -> dict[str, str]:
    hints: dict[str, str] = {}
    for line in text.splitlines():
        m = _HINT_RE.match(line.strip())
        if m and " " not in m.group("key"):
            hints[m.group("key")] = m.group("value")
    return hints
