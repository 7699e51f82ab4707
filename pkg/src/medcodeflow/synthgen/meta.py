"""Meta-description derivation from source notes.

This is the only stage that ever sees real note text, so it refuses to
run unless the note comes from a directory explicitly marked as a
secure ingestion context. The derived meta keeps structure and style
only and must itself pass the identifier screen before leaving the
stage.
"""

from __future__ import annotations

from pathlib import Path

from ..errors import PhiFilterRejection, SecureContextViolation
from ..gateway import ChatRequest
from ..gateway.blocks import format_hint, format_note_lines
from ..hashing import content_hash, json_hash
from .phi import phi_findings
from .prompts import system_prompt
from .types import AuditLog, MetaDescription

SECURE_MARKER = ".mcf-secure-context"


def require_secure_context(directory: str | Path) -> Path:
    """The ingestion directory must carry the marker file."""
    directory = Path(directory)
    if not (directory / SECURE_MARKER).exists():
        raise SecureContextViolation(
            f"{directory} is not a designated secure ingestion context "
            f"(missing {SECURE_MARKER})"
        )
    return directory


def derive_meta(
    source_text: str,
    gateway,
    context_dir: str | Path,
    audit: AuditLog | None = None,
    specialty_hint: str | None = None,
    version: str = "v1",
) -> MetaDescription:
    """Distill one source note into a structure-and-style sketch."""
    require_secure_context(context_dir)
    audit = audit or AuditLog()
    source_id = "meta-" + content_hash(source_text)[:16]
    lines = source_text.splitlines()
    parts = []
    if specialty_hint:
        parts.append(format_hint("specialty", specialty_hint))
    parts.append(format_note_lines(lines))
    request = ChatRequest(
        system_prompt=system_prompt("system_meta", version),
        user_prompt="\n".join(parts),
        schema_id="META_DESCRIPTION",
    )
    result = gateway.chat(request)
    payload = result.payload
    meta = MetaDescription(
        source_id=source_id,
        structure=tuple(payload["structure"]),
        style_notes=payload["style_notes"],
        specialty=payload["specialty"],
    )
    findings = []
    for text in (*meta.structure, meta.style_notes, meta.specialty):
        findings.extend(phi_findings(text))
    if findings:
        audit.emit(
            stage="meta",
            chart_id=source_id,
            inputs_hash=content_hash(source_text),
            outputs_hash=json_hash(meta.to_dict()),
            discarded=True,
            reason="phi filter rejected derived meta",
        )
        raise PhiFilterRejection(
            f"derived meta {source_id} contains identifying patterns",
            findings=findings,
        )
    audit.emit(
        stage="meta",
        chart_id=source_id,
        inputs_hash=content_hash(source_text),
        outputs_hash=json_hash(meta.to_dict()),
        reason="phi filter passed",
    )
    return meta
