"""Diagnosis and procedure code structure, validation, and catalogs.

Two code systems are supported. Diagnosis codes are 3-7 significant
characters (letter, digit, alphanumeric, then up to four more
alphanumerics) written with an optional dot after the third character;
the first three characters form the category, which rolls up into block
and chapter ranges. Procedure codes are exactly five characters, either
all digits or four digits plus an uppercase letter, grouped into flat
specialty ranges with no hierarchy.

Catalogs are TSV files: a `#system=... version=...` header, one
`code<TAB>description` row per entry, and optional `#chapters`,
`#blocks`, `#specialties` sections holding `label<TAB>start<TAB>end`
range rows (inclusive bounds, sorted, non-overlapping).
"""

from __future__ import annotations

import re
from bisect import bisect_right
from dataclasses import dataclass, field
from pathlib import Path

from .errors import (
    DuplicateCode,
    EmptyCatalog,
    InvalidRange,
    MalformedCode,
    ParseError,
    UnmappedCategory,
)

__all__ = [
    "ICD10CM",
    "CPT",
    "IcdCode",
    "CptCode",
    "RangeEntry",
    "CodeCatalog",
    "parse_icd",
    "parse_cpt",
    "render_icd",
    "truncate_to_level",
    "load_catalog",
    "chapter_of",
    "block_of",
    "specialty_of",
]

ICD10CM = "ICD10CM"
CPT = "CPT"

# Prefix lengths for hierarchy levels 0..2; level 3 is the full code.
LEVEL_PREFIX_LEN = {0: 3, 1: 4, 2: 5}

_CPT_RE = re.compile(r"^(\d{5}|\d{4}[A-Z])$")
_CATEGORY_RE = re.compile(r"^[A-Z][0-9][A-Z0-9]$")


@dataclass(frozen=True)
class IcdCode:
    """A validated diagnosis code.

    `normalized` is uppercase with the dot removed; `category` is the
    first three characters.
    """

    raw: str
    normalized: str

    @property
    def category(self) -> str:
        return self.normalized[:3]

    def render(self) -> str:
        return render_icd(self.normalized)


@dataclass(frozen=True)
class CptCode:
    raw: str
    normalized: str


def parse_icd(text: str) -> IcdCode:
    raw = text.strip()
    if not raw:
        raise MalformedCode("empty code")
    upper = raw.upper()
    if not upper[0].isalpha():
        raise MalformedCode(f"{raw!r}: must start with a letter", position=0)
    dot = upper.find(".")
    if dot != -1:
        if dot != 3:
            raise MalformedCode(
                f"{raw!r}: dot must follow the third character", position=dot
            )
        if upper.count(".") > 1:
            raise MalformedCode(f"{raw!r}: multiple dots", position=upper.find(".", 4))
        if len(upper) == 4:
            raise MalformedCode(f"{raw!r}: trailing dot", position=3)
        normalized = upper[:3] + upper[4:]
    else:
        normalized = upper
    if len(normalized) < 3:
        raise MalformedCode(f"{raw!r}: at least 3 characters required")
    if len(normalized) > 7:
        raise MalformedCode(f"{raw!r}: more than 7 characters", position=7)
    checks = [
        normalized[0].isalpha(),
        normalized[1].isdigit(),
        *(ch.isalnum() for ch in normalized[2:]),
    ]
    for pos, ok in enumerate(checks):
        if not ok:
            raise MalformedCode(
                f"{raw!r}: invalid character {normalized[pos]!r} at position {pos}",
                position=pos,
            )
    return IcdCode(raw=raw, normalized=normalized)


def render_icd(normalized: str) -> str:
    """Dotted display form: dot after the third character when longer."""
    if len(normalized) > 3:
        return normalized[:3] + "." + normalized[3:]
    return normalized


def parse_cpt(text: str) -> CptCode:
    raw = text.strip()
    if not raw:
        raise MalformedCode("empty code")
    upper = raw.upper()
    if not _CPT_RE.match(upper):
        if len(upper) != 5:
            raise MalformedCode(f"{raw!r}: procedure codes are exactly 5 characters")
        for pos, ch in enumerate(upper[:4]):
            if not ch.isdigit():
                raise MalformedCode(
                    f"{raw!r}: invalid character {ch!r} at position {pos}", position=pos
                )
        raise MalformedCode(
            f"{raw!r}: final character must be a digit or uppercase letter", position=4
        )
    return CptCode(raw=raw, normalized=upper)


def truncate_to_level(code: IcdCode | str, level: int) -> str:
    """Prefix of the normalized code for hierarchy level 0..3.

    Level 0 is the category (3 chars), levels 1 and 2 are 4- and 5-char
    prefixes, level 3 the full code. Codes shorter than the prefix
    length are returned whole.
    """
    if level not in (0, 1, 2, 3):
        raise ValueError(f"level must be 0..3, got {level}")
    normalized = code.normalized if isinstance(code, IcdCode) else code
    if level == 3:
        return normalized
    return normalized[: LEVEL_PREFIX_LEN[level]]


@dataclass(frozen=True)
class RangeEntry:
    label: str
    start: str
    end: str

    def contains(self, key: str) -> bool:
        return self.start <= key <= self.end


@dataclass
class CodeCatalog:
    system: str
    version: str
    entries: dict[str, str]  # normalized code -> description
    chapters: list[RangeEntry] = field(default_factory=list)
    blocks: list[RangeEntry] = field(default_factory=list)
    specialty_ranges: list[RangeEntry] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)

    def description(self, normalized: str) -> str | None:
        return self.entries.get(normalized)

    def codes(self) -> list[str]:
        return sorted(self.entries)


_HEADER_RE = re.compile(r"^#system=(\S+)\s+version=(\S+)\s*$")


def _check_ranges(
    ranges: list[RangeEntry], section: str, validate_bound
) -> None:
    for entry in ranges:
        for bound in (entry.start, entry.end):
            validate_bound(entry, bound)
        if entry.start > entry.end:
            raise InvalidRange(
                f"{section} {entry.label!r}: start {entry.start} after end {entry.end}"
            )
    for prev, cur in zip(ranges, ranges[1:]):
        if cur.start <= prev.end:
            raise InvalidRange(
                f"{section} ranges must be sorted and non-overlapping: "
                f"{prev.label!r} [{prev.start}-{prev.end}] vs "
                f"{cur.label!r} [{cur.start}-{cur.end}]"
            )


def _validate_category_bound(entry: RangeEntry, bound: str) -> None:
    if not _CATEGORY_RE.match(bound):
        raise InvalidRange(
            f"range {entry.label!r}: bound {bound!r} is not a 3-character category"
        )


def _validate_cpt_bound(entry: RangeEntry, bound: str) -> None:
    if not bound.isdigit() or len(bound) != 5:
        raise InvalidRange(
            f"specialty {entry.label!r}: bound {bound!r} is not a 5-digit code"
        )


def _locate(ranges: list[RangeEntry], starts: list[str], key: str) -> RangeEntry | None:
    i = bisect_right(starts, key) - 1
    if i >= 0 and ranges[i].contains(key):
        return ranges[i]
    return None


def load_catalog(path: str | Path, system: str | None = None) -> CodeCatalog:
    """Parse and fully validate a catalog TSV.

    Raises ParseError (with line number), DuplicateCode, InvalidRange, or
    EmptyCatalog. When chapter/block sections are present every entry's
    category must fall inside exactly one range of each.
    """
    path = Path(path)
    entries: dict[str, str] = {}
    sections: dict[str, list[RangeEntry]] = {"chapters": [], "blocks": [], "specialties": []}
    current: str | None = None
    file_system: str | None = None
    version: str | None = None

    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            if lineno == 1 or (file_system is None and line.startswith("#system=")):
                m = _HEADER_RE.match(line)
                if not m:
                    raise ParseError(
                        "expected header '#system=<SYSTEM> version=<VERSION>'", lineno
                    )
                file_system, version = m.group(1), m.group(2)
                if file_system not in (ICD10CM, CPT):
                    raise ParseError(f"unknown system {file_system!r}", lineno)
                continue
            if line.startswith("#"):
                name = line[1:].strip()
                if name not in sections:
                    raise ParseError(f"unknown section {line!r}", lineno)
                if name == "specialties" and file_system != CPT:
                    raise ParseError("specialty ranges only apply to CPT", lineno)
                if name in ("chapters", "blocks") and file_system != ICD10CM:
                    raise ParseError(f"{name} only apply to ICD10CM", lineno)
                current = name
                continue
            cols = line.split("\t")
            if current is None:
                if len(cols) != 2:
                    raise ParseError(
                        f"expected 'code<TAB>description', got {len(cols)} columns", lineno
                    )
                code_text, description = cols[0].strip(), cols[1].strip()
                if not description:
                    raise ParseError(f"empty description for {code_text!r}", lineno)
                try:
                    if file_system == ICD10CM:
                        normalized = parse_icd(code_text).normalized
                    else:
                        normalized = parse_cpt(code_text).normalized
                except MalformedCode as exc:
                    raise ParseError(str(exc), lineno) from exc
                if normalized in entries:
                    raise DuplicateCode(f"line {lineno}: duplicate code {code_text!r}")
                entries[normalized] = description
            else:
                if len(cols) != 3:
                    raise ParseError(
                        f"expected 'label<TAB>start<TAB>end', got {len(cols)} columns", lineno
                    )
                sections[current].append(
                    RangeEntry(cols[0].strip(), cols[1].strip().upper(), cols[2].strip().upper())
                )

    if file_system is None:
        raise ParseError("missing '#system=' header", 1)
    if system is not None and file_system != system:
        raise ParseError(f"expected system {system}, file declares {file_system}", 1)
    if not entries:
        raise EmptyCatalog(f"{path}: no code entries")

    catalog = CodeCatalog(
        system=file_system,
        version=version or "",
        entries=entries,
        chapters=sections["chapters"],
        blocks=sections["blocks"],
        specialty_ranges=sections["specialties"],
    )
    _check_ranges(catalog.chapters, "chapter", _validate_category_bound)
    _check_ranges(catalog.blocks, "block", _validate_category_bound)
    _check_ranges(catalog.specialty_ranges, "specialty", _validate_cpt_bound)

    if catalog.system == ICD10CM:
        for ranges, section in ((catalog.chapters, "chapter"), (catalog.blocks, "block")):
            if not ranges:
                continue
            starts = [r.start for r in ranges]
            for normalized in catalog.entries:
                if _locate(ranges, starts, normalized[:3]) is None:
                    raise InvalidRange(
                        f"code {render_icd(normalized)} falls outside every {section} range"
                    )
    return catalog


def chapter_of(code: IcdCode, catalog: CodeCatalog) -> RangeEntry:
    """Chapter range covering the code's category.

    Raises UnmappedCategory when no configured chapter contains it.
    """
    found = _locate(catalog.chapters, [r.start for r in catalog.chapters], code.category)
    if found is None:
        raise UnmappedCategory(f"category {code.category} not covered by any chapter")
    return found


def block_of(code: IcdCode, catalog: CodeCatalog) -> RangeEntry:
    found = _locate(catalog.blocks, [r.start for r in catalog.blocks], code.category)
    if found is None:
        raise UnmappedCategory(f"category {code.category} not covered by any block")
    return found


def specialty_of(code: CptCode, catalog: CodeCatalog) -> RangeEntry | None:
    """Specialty range containing a procedure code.

    Letter-suffixed codes sit outside the numeric specialty ranges and
    return None.
    """
    if not code.normalized.isdigit():
        return None
    return _locate(
        catalog.specialty_ranges,
        [r.start for r in catalog.specialty_ranges],
        code.normalized,
    )
