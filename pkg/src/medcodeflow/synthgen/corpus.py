"""Corpus orchestration: plan units, run both stages, account for every unit.

Charts are independent units of work processed in a fixed plan order.
Corpus and audit files receive append-only whole-record writes as each
unit completes, so an interrupted run resumes by skipping the units
whose terminal outcome is already on disk. Every attempted unit ends in
exactly one of three audited states: retained, discarded, or failed.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from ..codeindex import DEFAULT_MAX_N, DEFAULT_TOP_N
from ..errors import PhiFilterRejection, SchemaViolation
from ..hashing import content_hash
from ..jsonl import append_jsonl, dump_json, read_jsonl, write_jsonl
from ..seeds import derive_seed
from .cpt import generate_cpt_note, label_cpt_note
from .icd import (
    DEFAULT_MIN_SCORE,
    generate_icd_chart,
    label_icd_chart,
    load_domain_pools,
)
from .types import AuditLog, ClinicalChart, Discard, MetaDescription

DETERMINISTIC_CREATED_AT = "2026-01-01T00:00:00Z"

_META_FIXTURES = Path(__file__).parent.parent / "data" / "meta_fixtures.jsonl"


def load_meta_fixtures(path: str | Path = _META_FIXTURES) -> list[MetaDescription]:
    return [MetaDescription.from_dict(rec) for rec in read_jsonl(path)]


@dataclass(frozen=True)
class CorpusConfig:
    """One corpus run: either ICD domains or CPT specialties, not both."""

    out_dir: str | Path
    icd_counts: Mapping[str, int] = field(default_factory=dict)
    cpt_counts: Mapping[str, int] = field(default_factory=dict)
    seed: int = 0
    top_n: int = DEFAULT_TOP_N
    max_n: int = DEFAULT_MAX_N
    min_score: float = DEFAULT_MIN_SCORE
    window: int = 1
    stride: int = 1
    deterministic: bool = True
    prompt_version: str = "v1"

    def __post_init__(self):
        if bool(self.icd_counts) == bool(self.cpt_counts):
            raise ValueError("config needs icd_counts or cpt_counts, exactly one")


@dataclass(frozen=True)
class _Unit:
    kind: str
    group: str
    index: int
    seed: int
    meta: MetaDescription | None


def _plan_units(config: CorpusConfig, metas: list[MetaDescription]) -> list[_Unit]:
    units: list[_Unit] = []
    for domain in sorted(config.icd_counts):
        for i in range(config.icd_counts[domain]):
            units.append(
                _Unit(
                    kind="icd",
                    group=domain,
                    index=i,
                    seed=derive_seed(config.seed, f"icd/{domain}", i),
                    meta=metas[i % len(metas)],
                )
            )
    for specialty in sorted(config.cpt_counts):
        for i in range(config.cpt_counts[specialty]):
            units.append(
                _Unit(
                    kind="cpt",
                    group=specialty,
                    index=i,
                    seed=derive_seed(config.seed, f"cpt/{specialty}", i),
                    meta=None,
                )
            )
    return units


def _unit_inputs_hash(unit: _Unit) -> str:
    """Matches the inputs_hash the generate stage writes for this unit."""
    if unit.kind == "icd":
        return content_hash(unit.meta.source_id, unit.group, str(unit.seed))
    return content_hash(unit.group, str(unit.seed))


def _completed_units(audit_path: Path, charts_path: Path) -> set[str]:
    """Units whose terminal outcome already reached disk."""
    if not audit_path.exists():
        return set()
    retained = set()
    if charts_path.exists():
        retained = {rec["chart_id"] for rec in read_jsonl(charts_path)}
    done: set[str] = set()
    unit_of: dict[str, str] = {}
    settled: set[str] = set()
    for rec in read_jsonl(audit_path):
        if rec["stage"] == "generate":
            unit_of[rec["chart_id"]] = rec["inputs_hash"]
            if rec["discarded"]:
                done.add(rec["inputs_hash"])
        elif rec["discarded"]:
            settled.add(rec["chart_id"])
    for chart_id, inputs_hash in unit_of.items():
        if chart_id in retained or chart_id in settled:
            done.add(inputs_hash)
    return done


def run_corpus(
    config: CorpusConfig,
    catalog,
    gateway,
    embedder,
    index,
    metas: list[MetaDescription] | None = None,
    pools: dict[str, list[str]] | None = None,
) -> dict:
    """Generate and label a corpus, returning its diagnostics.

    Aborts only on config or catalog problems; anything that goes wrong
    for an individual chart is audited and the unit is skipped.
    """
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    charts_path = out / "charts.jsonl"
    gold_path = out / "gold.jsonl"
    audit_path = out / "audit.jsonl"

    if config.icd_counts:
        metas = metas if metas is not None else load_meta_fixtures()
        if not metas:
            raise ValueError("icd generation needs at least one meta-description")
        pools = pools if pools is not None else load_domain_pools(catalog=catalog)
    units = _plan_units(config, metas or [])
    created_at = (
        DETERMINISTIC_CREATED_AT
        if config.deterministic
        else dt.datetime.now(dt.timezone.utc).isoformat()
    )

    audit = AuditLog(path=audit_path)
    done = _completed_units(audit_path, charts_path)
    for unit in units:
        if _unit_inputs_hash(unit) in done:
            continue
        try:
            if unit.kind == "icd":
                chart = generate_icd_chart(
                    unit.meta,
                    catalog,
                    gateway,
                    seed=unit.seed,
                    domain=unit.group,
                    pools=pools,
                    audit=audit,
                    created_at=created_at,
                    version=config.prompt_version,
                )
            else:
                chart = generate_cpt_note(
                    catalog,
                    unit.group,
                    gateway,
                    seed=unit.seed,
                    audit=audit,
                    created_at=created_at,
                    version=config.prompt_version,
                )
        except PhiFilterRejection:
            continue
        except SchemaViolation as exc:
            audit.emit(
                stage="generate",
                chart_id=f"unit-{_unit_inputs_hash(unit)[:12]}",
                inputs_hash=_unit_inputs_hash(unit),
                outputs_hash=content_hash(str(exc)),
                discarded=True,
                reason=f"generation failed: {exc}",
            )
            continue

        try:
            if unit.kind == "icd":
                result = label_icd_chart(
                    chart,
                    index,
                    embedder,
                    gateway,
                    audit=audit,
                    top_n=config.top_n,
                    min_score=config.min_score,
                    window=config.window,
                    stride=config.stride,
                    version=config.prompt_version,
                )
            else:
                result = label_cpt_note(
                    chart,
                    index,
                    embedder,
                    gateway,
                    audit=audit,
                    n=config.top_n,
                    max_n=config.max_n,
                    min_score=config.min_score,
                    version=config.prompt_version,
                )
        except SchemaViolation as exc:
            audit.emit(
                stage="label",
                chart_id=chart.chart_id,
                inputs_hash=content_hash(chart.chart_id),
                outputs_hash=content_hash(str(exc)),
                discarded=True,
                reason=f"labeling failed: {exc}",
            )
            continue
        if isinstance(result, Discard):
            continue
        append_jsonl(charts_path, chart.to_dict())
        append_jsonl(
            gold_path,
            {"chart_id": chart.chart_id, "assignments": [a.to_dict() for a in result]},
        )

    diagnostics = build_diagnostics(
        out,
        attempted=len(units),
        catalog=catalog,
        generator_provider_id=getattr(gateway.provider, "provider_id", "unknown"),
        embedding_provider_id=embedder.provider_id,
    )
    dump_json(out / "diagnostics.json", diagnostics)
    return diagnostics


def build_diagnostics(
    out_dir: Path,
    attempted: int,
    catalog,
    generator_provider_id: str,
    embedding_provider_id: str,
) -> dict:
    charts_path = out_dir / "charts.jsonl"
    gold_path = out_dir / "gold.jsonl"
    charts = list(read_jsonl(charts_path)) if charts_path.exists() else []
    gold = list(read_jsonl(gold_path)) if gold_path.exists() else []

    code_frequency: dict[str, int] = {}
    labels_per_document: dict[str, int] = {}
    for rec in gold:
        n = len(rec["assignments"])
        labels_per_document[str(n)] = labels_per_document.get(str(n), 0) + 1
        for assignment in rec["assignments"]:
            code = assignment["code"]
            code_frequency[code] = code_frequency.get(code, 0) + 1

    discards = []
    audit_path = out_dir / "audit.jsonl"
    if audit_path.exists():
        seen = set()
        for rec in read_jsonl(audit_path):
            if rec["discarded"] and rec["chart_id"] not in seen:
                seen.add(rec["chart_id"])
                discards.append({"chart_id": rec["chart_id"], "reason": rec["reason"]})

    retained = len(charts)
    discarded = attempted - retained
    return {
        "schema": "medcodeflow/corpus-diagnostics/v1",
        "catalog_system": catalog.system,
        "catalog_version": catalog.version,
        "generator_provider_id": generator_provider_id,
        "embedding_provider_id": embedding_provider_id,
        "attempted": attempted,
        "retained": retained,
        "discarded": discarded,
        "discard_rate": discarded / attempted if attempted else 0.0,
        "discards": discards,
        "code_frequency": dict(sorted(code_frequency.items())),
        "labels_per_document": dict(
            sorted(labels_per_document.items(), key=lambda kv: int(kv[0]))
        ),
    }


def relabel_corpus(
    charts: list[ClinicalChart],
    index,
    embedder,
    gateway,
    out_path: str | Path,
    audit: AuditLog | None = None,
    source: str = "PREDICTED",
    top_n: int = DEFAULT_TOP_N,
    max_n: int = DEFAULT_MAX_N,
    min_score: float = DEFAULT_MIN_SCORE,
    window: int = 1,
    stride: int = 1,
    version: str = "v1",
) -> dict:
    """Label existing charts again, typically with a noisier provider.

    Every chart appears in the output; a chart whose labeling is
    discarded contributes an empty assignment list, which is what an
    evaluation should see for a model that produced nothing.
    """
    audit = audit or AuditLog()
    records = []
    discarded = 0
    for chart in charts:
        if index.system == "CPT":
            result = label_cpt_note(
                chart,
                index,
                embedder,
                gateway,
                audit=audit,
                n=top_n,
                max_n=max_n,
                min_score=min_score,
                source=source,
                version=version,
            )
        else:
            result = label_icd_chart(
                chart,
                index,
                embedder,
                gateway,
                audit=audit,
                top_n=top_n,
                min_score=min_score,
                window=window,
                stride=stride,
                source=source,
                version=version,
            )
        if isinstance(result, Discard):
            discarded += 1
            result = []
        records.append(
            {"chart_id": chart.chart_id, "assignments": [a.to_dict() for a in result]}
        )
    write_jsonl(out_path, records)
    return {"charts": len(records), "discarded": discarded}
