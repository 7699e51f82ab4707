"""Domain records shared by the generation and labeling stages."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from ..jsonl import append_jsonl

DOMAIN_TAGS = ("AdvancedIllness", "Frailty", "SDoH", "General")


@dataclass(frozen=True)
class MetaDescription:
    """Structure-only sketch of a source note; carries no patient text."""

    source_id: str
    structure: tuple[str, ...]
    style_notes: str
    specialty: str

    def to_dict(self) -> dict:
        return {
            "source_id": self.source_id,
            "structure": list(self.structure),
            "style_notes": self.style_notes,
            "specialty": self.specialty,
        }

    @staticmethod
    def from_dict(data: dict) -> "MetaDescription":
        return MetaDescription(
            source_id=data["source_id"],
            structure=tuple(data["structure"]),
            style_notes=data["style_notes"],
            specialty=data["specialty"],
        )


@dataclass(frozen=True)
class Provenance:
    meta_source_id: str
    generator_provider_id: str
    created_at: str
    pipeline_version: str

    def to_dict(self) -> dict:
        return {
            "meta_source_id": self.meta_source_id,
            "generator_provider_id": self.generator_provider_id,
            "created_at": self.created_at,
            "pipeline_version": self.pipeline_version,
        }


@dataclass(frozen=True)
class ClinicalChart:
    chart_id: str
    lines: tuple[str, ...]
    seed_code: str
    target_codes: tuple[str, ...]
    domain_tags: tuple[str, ...]
    provenance: Provenance

    def to_dict(self) -> dict:
        return {
            "chart_id": self.chart_id,
            "lines": list(self.lines),
            "seed_code": self.seed_code,
            "target_codes": list(self.target_codes),
            "domain_tags": list(self.domain_tags),
            "provenance": self.provenance.to_dict(),
        }

    @staticmethod
    def from_dict(data: dict) -> "ClinicalChart":
        prov = data["provenance"]
        return ClinicalChart(
            chart_id=data["chart_id"],
            lines=tuple(data["lines"]),
            seed_code=data["seed_code"],
            target_codes=tuple(data["target_codes"]),
            domain_tags=tuple(data["domain_tags"]),
            provenance=Provenance(
                meta_source_id=prov["meta_source_id"],
                generator_provider_id=prov["generator_provider_id"],
                created_at=prov["created_at"],
                pipeline_version=prov["pipeline_version"],
            ),
        )


@dataclass(frozen=True)
class CodeAssignment:
    code: str
    rationale: str
    evidence_lines: frozenset[int]
    source: str = "GOLD"

    def to_dict(self) -> dict:
        return {
            "code": self.code,
            "rationale": self.rationale,
            "evidence_lines": sorted(self.evidence_lines),
        }


@dataclass(frozen=True)
class Discard:
    """Terminal non-error outcome for a chart that cannot be labeled."""

    reason: str


@dataclass(frozen=True)
class AuditRecord:
    stage: str
    chart_id: str
    inputs_hash: str
    outputs_hash: str
    candidates: tuple | None = None
    discarded: bool = False
    reason: str | None = None

    def to_dict(self) -> dict:
        return {
            "stage": self.stage,
            "chart_id": self.chart_id,
            "inputs_hash": self.inputs_hash,
            "outputs_hash": self.outputs_hash,
            "candidates": [list(c) for c in self.candidates]
            if self.candidates is not None
            else None,
            "discarded": self.discarded,
            "reason": self.reason,
        }


@dataclass
class AuditLog:
    """In-memory audit trail with an optional append-only JSONL sink."""

    path: Path | None = None
    records: list[AuditRecord] = field(default_factory=list)

    def emit(
        self,
        stage: str,
        chart_id: str,
        inputs_hash: str,
        outputs_hash: str,
        candidates=None,
        discarded: bool = False,
        reason: str | None = None,
    ) -> AuditRecord:
        if discarded and not reason:
            raise ValueError("discarded audit records require a reason")
        record = AuditRecord(
            stage=stage,
            chart_id=chart_id,
            inputs_hash=inputs_hash,
            outputs_hash=outputs_hash,
            candidates=tuple(tuple(c) for c in candidates)
            if candidates is not None
            else None,
            discarded=discarded,
            reason=reason,
        )
        self.records.append(record)
        if self.path is not None:
            append_jsonl(self.path, record.to_dict())
        return record

    def for_chart(self, chart_id: str) -> list[AuditRecord]:
        return [r for r in self.records if r.chart_id == chart_id]
