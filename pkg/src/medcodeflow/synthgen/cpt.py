"""Procedure note generation and description-mediated labeling.

Procedure labeling never asks the model for codes directly. The model
first writes short free-text descriptions of what the note documents;
each description is embedded and resolved against the catalog index
with widening retrieval, and a final constrained selection picks one
code per resolved description. A note where nothing resolves is
discarded, which is an ordinary audited outcome rather than an error.
"""

from __future__ import annotations

import random

from .. import PIPELINE_VERSION
from ..codeindex import DEFAULT_MAX_N, DEFAULT_TOP_N, fallback_expand
from ..errors import EmptyPool, PhiFilterRejection, UnknownSpecialty
from ..gateway import ChatRequest
from ..gateway.blocks import CodeItem, format_code_item, format_hint, format_note_lines
from ..hashing import content_hash, json_hash
from .icd import DEFAULT_MIN_SCORE, stable_seed
from .phi import phi_findings
from .prompts import system_prompt
from .types import AuditLog, ClinicalChart, CodeAssignment, Discard, Provenance


def generate_cpt_note(
    catalog,
    specialty: str,
    gateway,
    seed: int,
    audit: AuditLog | None = None,
    created_at: str = "",
    version: str = "v1",
) -> ClinicalChart:
    """One synthetic procedure note seeded from a specialty range."""
    audit = audit or AuditLog()
    ranges = [r for r in catalog.specialty_ranges if r.label == specialty]
    if not ranges:
        known = ", ".join(r.label for r in catalog.specialty_ranges)
        raise UnknownSpecialty(f"specialty {specialty!r} not in catalog ({known})")
    eligible = [
        code
        for code in catalog.codes()
        if any(r.contains(code) for r in ranges)
    ]
    if not eligible:
        raise EmptyPool(f"specialty {specialty!r} has no codes in the catalog")
    rng = random.Random(seed)
    seed_code = rng.choice(eligible)

    note_prompt = "\n".join(
        [
            format_hint("specialty", specialty),
            "",
            format_code_item(CodeItem(seed_code, catalog.entries[seed_code])),
        ]
    )
    note = gateway.chat(
        ChatRequest(
            system_prompt=system_prompt("system_cpt_note", version),
            user_prompt=note_prompt,
            schema_id="NOTE_TEXT",
            seed=seed,
        )
    )
    lines = tuple(note.payload["lines"])

    chart_id = "cpt-" + content_hash(specialty, seed_code, *lines)[:16]
    inputs_hash = content_hash(specialty, str(seed))
    findings = []
    for line in lines:
        findings.extend(phi_findings(line))
    if findings:
        audit.emit(
            stage="generate",
            chart_id=chart_id,
            inputs_hash=inputs_hash,
            outputs_hash=content_hash(*lines),
            discarded=True,
            reason="phi filter rejected generated note",
        )
        raise PhiFilterRejection(f"note {chart_id} quarantined", findings=findings)

    chart = ClinicalChart(
        chart_id=chart_id,
        lines=lines,
        seed_code=seed_code,
        target_codes=(seed_code,),
        domain_tags=("General",),
        provenance=Provenance(
            meta_source_id=f"specialty:{specialty}",
            generator_provider_id=getattr(gateway.provider, "provider_id", "unknown"),
            created_at=created_at,
            pipeline_version=PIPELINE_VERSION,
        ),
    )
    audit.emit(
        stage="generate",
        chart_id=chart_id,
        inputs_hash=inputs_hash,
        outputs_hash=json_hash(chart.to_dict()),
    )
    return chart


def label_cpt_note(
    chart: ClinicalChart,
    index,
    embedder,
    gateway,
    audit: AuditLog | None = None,
    n: int = DEFAULT_TOP_N,
    max_n: int = DEFAULT_MAX_N,
    min_score: float = DEFAULT_MIN_SCORE,
    source: str = "GOLD",
    version: str = "v1",
) -> list[CodeAssignment] | Discard:
    """Describe, resolve, select. Returns Discard when nothing survives."""
    audit = audit or AuditLog()
    index.check_provider(embedder.provider_id)
    desc_of = dict(zip(index.codes, index.descriptions))
    inputs_hash = content_hash(chart.chart_id, index.provider_id)

    extraction = gateway.chat(
        ChatRequest(
            system_prompt=system_prompt("system_cpt_desc", version),
            user_prompt=format_note_lines(list(chart.lines)),
            schema_id="DESCRIPTION_LIST",
            seed=stable_seed(chart.chart_id, 0),
        )
    )
    descriptions = extraction.payload["descriptions"]

    resolved: list[tuple[str, list[tuple[str, float]]]] = []
    all_candidates: list[tuple[str, float]] = []
    for description in descriptions:
        vector = embedder.embed([description])[0]
        result = fallback_expand(
            index,
            vector,
            n=n,
            max_n=max_n,
            accept=lambda _code, score: score >= min_score,
        )
        all_candidates.extend(result.candidates)
        if result.candidates:
            resolved.append((description, result.candidates))

    def discard(reason: str) -> Discard:
        audit.emit(
            stage="label",
            chart_id=chart.chart_id,
            inputs_hash=inputs_hash,
            outputs_hash=content_hash(reason),
            candidates=all_candidates,
            discarded=True,
            reason=reason,
        )
        return Discard(reason)

    if not resolved:
        return discard("no procedure description resolved to a catalog code")

    group_items = [
        format_code_item(CodeItem(code, desc_of[code], score=score, group=gi))
        for gi, (_desc, candidates) in enumerate(resolved)
        for code, score in candidates
    ]
    prompt = "\n".join([format_hint("min_score", f"{min_score:.2f}"), "", *group_items])
    allowed = {code for _desc, cands in resolved for code, _score in cands}

    codes: list[str] | None = None
    for attempt in range(2):
        selection = gateway.chat(
            ChatRequest(
                system_prompt=system_prompt("system_cpt_select", version),
                user_prompt=prompt,
                schema_id="CODE_SELECTION",
                seed=stable_seed(chart.chart_id, 1 + attempt),
            )
        )
        picked = selection.payload["codes"]
        if all(code in allowed for code in picked):
            codes = picked
            break
        audit.emit(
            stage="label",
            chart_id=chart.chart_id,
            inputs_hash=inputs_hash,
            outputs_hash=json_hash(picked),
            reason="selection outside candidate set",
        )
    if codes is None:
        return discard("selection violated the candidate constraint twice")
    if not codes:
        return discard("constrained selection returned no codes")

    rationale_of: dict[str, str] = {}
    for description, candidates in resolved:
        for code, _score in candidates:
            rationale_of.setdefault(code, description)
    assignments = []
    seen = set()
    for code in codes:
        if code in seen:
            continue
        seen.add(code)
        assignments.append(
            CodeAssignment(code, rationale_of[code], frozenset(), source)
        )
    audit.emit(
        stage="label",
        chart_id=chart.chart_id,
        inputs_hash=inputs_hash,
        outputs_hash=json_hash([a.to_dict() for a in assignments]),
        candidates=all_candidates,
    )
    return assignments
