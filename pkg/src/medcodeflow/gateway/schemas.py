"""Named output schemas and response validation.

Each schema id names the exact JSON shape a model response must take.
Validation is strict (unknown fields rejected) and failures carry the
JSON path of the first offending element so the gateway can feed a
precise error back to the model on retry.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Any

from pydantic import BaseModel, ConfigDict, Field, TypeAdapter, ValidationError

from ..errors import SchemaViolation
from ..hashing import canonical_json

__all__ = [
    "SCHEMA_IDS",
    "ICD_ASSIGNMENTS",
    "CPT_ASSIGNMENTS",
    "NOTE_TEXT",
    "META_DESCRIPTION",
    "CODE_SELECTION",
    "DESCRIPTION_LIST",
    "ValidatedOutput",
    "validate_schema",
    "serialize_payload",
]

ICD_ASSIGNMENTS = "ICD_ASSIGNMENTS"
CPT_ASSIGNMENTS = "CPT_ASSIGNMENTS"
NOTE_TEXT = "NOTE_TEXT"
META_DESCRIPTION = "META_DESCRIPTION"
CODE_SELECTION = "CODE_SELECTION"
DESCRIPTION_LIST = "DESCRIPTION_LIST"

SCHEMA_IDS = (
    ICD_ASSIGNMENTS,
    CPT_ASSIGNMENTS,
    NOTE_TEXT,
    META_DESCRIPTION,
    CODE_SELECTION,
    DESCRIPTION_LIST,
)


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class Evidence(_Strict):
    line_index: list[int] = Field(default_factory=list)
    quote: str | None = None

    model_config = ConfigDict(extra="forbid")


class IcdAssignmentItem(_Strict):
    code: str = Field(min_length=1)
    rationale: str = Field(min_length=1)
    evidence: Evidence


class CptAssignmentItem(_Strict):
    code: str = Field(min_length=1)
    rationale: str = Field(min_length=1)


class NoteText(_Strict):
    lines: list[str] = Field(min_length=1)


class MetaDescriptionPayload(_Strict):
    structure: list[str] = Field(min_length=1)
    style_notes: str
    specialty: str


class CodeSelection(_Strict):
    codes: list[str]


class DescriptionList(_Strict):
    descriptions: list[str]


_ADAPTERS: dict[str, TypeAdapter] = {
    ICD_ASSIGNMENTS: TypeAdapter(list[IcdAssignmentItem]),
    CPT_ASSIGNMENTS: TypeAdapter(list[CptAssignmentItem]),
    NOTE_TEXT: TypeAdapter(NoteText),
    META_DESCRIPTION: TypeAdapter(MetaDescriptionPayload),
    CODE_SELECTION: TypeAdapter(CodeSelection),
    DESCRIPTION_LIST: TypeAdapter(DescriptionList),
}

_FENCE_RE = re.compile(r"```(?:json)?\s*(.*?)```", re.DOTALL)


@dataclass(frozen=True)
class ValidatedOutput:
    schema_id: str
    payload: Any  # plain JSON-compatible value
    raw_text: str


def _negative_line_index(payload: Any) -> str | None:
    """pydantic's ge constraint on list items reports awkward paths for
    plain ints, so the non-negativity check is explicit."""
    if isinstance(payload, list):
        for i, item in enumerate(payload):
            ev = item.get("evidence") if isinstance(item, dict) else None
            for j, idx in enumerate((ev or {}).get("line_index", [])):
                if idx < 0:
                    return f"$[{i}].evidence.line_index[{j}]"
    return None


def _json_path(loc: tuple) -> str:
    path = "$"
    for part in loc:
        path += f"[{part}]" if isinstance(part, int) else f".{part}"
    return path


def _extract_json(raw_text: str) -> Any:
    text = raw_text.strip()
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        pass
    m = _FENCE_RE.search(text)
    if m:
        try:
            return json.loads(m.group(1).strip())
        except json.JSONDecodeError:
            pass
    raise SchemaViolation("response is not valid JSON", json_path="$", raw_text=raw_text)


def validate_schema(raw_text: str, schema_id: str) -> ValidatedOutput:
    """Parse and validate raw model output against a schema id.

    Pure: no IO, no clock, no randomness. Raises SchemaViolation with
    the JSON path of the first failure.
    """
    adapter = _ADAPTERS.get(schema_id)
    if adapter is None:
        raise SchemaViolation(f"unknown schema id {schema_id!r}", raw_text=raw_text)
    value = _extract_json(raw_text)
    try:
        validated = adapter.validate_python(value)
    except ValidationError as exc:
        first = exc.errors()[0]
        path = _json_path(tuple(first["loc"]))
        raise SchemaViolation(
            f"{first['msg']}", json_path=path, raw_text=raw_text
        ) from exc
    payload = adapter.dump_python(validated, mode="json")
    bad_path = _negative_line_index(payload)
    if bad_path is not None:
        raise SchemaViolation(
            "line_index entries must be non-negative", json_path=bad_path, raw_text=raw_text
        )
    return ValidatedOutput(schema_id=schema_id, payload=payload, raw_text=raw_text)


def serialize_payload(payload: Any) -> str:
    """Canonical serialization; validate_schema(serialize_payload(p)) == p."""
    return canonical_json(payload)
