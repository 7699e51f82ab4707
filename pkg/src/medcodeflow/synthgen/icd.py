"""Diagnosis chart generation and retrieval-constrained labeling.

Generation samples a seed code from the domain pool, asks the model
for plausible co-occurring codes (validating each against the pinned
catalog), then asks for a note conditioned on the meta-description and
the full code set. Labeling embeds each line, retrieves candidates,
and lets the model assign codes with line evidence, restricted to the
retrieved candidates; anything it suggests outside that list goes to a
review queue instead of the gold set.
"""

from __future__ import annotations

import random
from pathlib import Path

from .. import PIPELINE_VERSION
from ..codeindex import DEFAULT_TOP_N, query_top_n
from ..errors import EmptyPool, MalformedCode, PhiFilterRejection
from ..gateway import ChatRequest
from ..gateway.blocks import CodeItem, format_code_item, format_hint, format_note_lines
from ..hashing import content_hash, json_hash, stable_hash64
from ..jsonl import load_json
from ..taxonomy import parse_icd, render_icd
from .phi import phi_findings
from .prompts import system_prompt
from .types import AuditLog, ClinicalChart, CodeAssignment, MetaDescription, Provenance

_POOLS_FILE = Path(__file__).parent.parent / "data" / "domain_pools.json"

DEFAULT_COOCCUR_RANGE = (1, 6)
DEFAULT_MIN_SCORE = 0.30
COOCCUR_POOL_SIZE = 12


def load_domain_pools(path: str | Path = _POOLS_FILE, catalog=None) -> dict[str, list[str]]:
    """Seed pools per domain, filtered to codes the catalog knows."""
    raw = load_json(path)
    pools: dict[str, list[str]] = {}
    for domain, codes in raw.items():
        normalized = []
        for code in codes:
            key = parse_icd(code).normalized
            if catalog is None or key in catalog.entries:
                normalized.append(key)
        pools[domain] = sorted(set(normalized))
    return pools


def generate_icd_chart(
    meta: MetaDescription,
    catalog,
    gateway,
    seed: int,
    domain: str,
    pools: dict[str, list[str]],
    audit: AuditLog | None = None,
    created_at: str = "",
    cooccur_range: tuple[int, int] = DEFAULT_COOCCUR_RANGE,
    version: str = "v1",
) -> ClinicalChart:
    """One synthetic diagnosis chart, deterministic for a mock gateway."""
    audit = audit or AuditLog()
    pool = pools.get(domain) or []
    if not pool:
        raise EmptyPool(f"no seed codes available for domain {domain!r}")
    rng = random.Random(seed)
    seed_code = rng.choice(sorted(pool))

    want = rng.randint(*cooccur_range)
    offer_from = [c for c in catalog.codes() if c != seed_code]
    offered = sorted(rng.sample(offer_from, min(COOCCUR_POOL_SIZE, len(offer_from))))
    select_prompt = "\n".join(
        [
            format_hint("select_max", want),
            format_hint("domain", domain),
            format_hint("seed_code", render_icd(seed_code)),
            "",
            *(
                format_code_item(CodeItem(code, catalog.entries[code]))
                for code in offered
            ),
        ]
    )
    selection = gateway.chat(
        ChatRequest(
            system_prompt=system_prompt("system_cooccur", version),
            user_prompt=select_prompt,
            schema_id="CODE_SELECTION",
            seed=seed,
        )
    )
    pending_events: list[dict] = []
    cooccurring: list[str] = []
    for raw_code in selection.payload["codes"]:
        try:
            key = parse_icd(raw_code).normalized
        except MalformedCode:
            key = None
        if key is None or key not in catalog.entries:
            pending_events.append(
                {"code": raw_code, "reason": "invalid co-occurring code"}
            )
            continue
        if key != seed_code and key not in cooccurring:
            cooccurring.append(key)
    target_codes = (seed_code, *cooccurring)

    note_prompt = "\n".join(
        [
            format_hint("sections", "|".join(meta.structure)),
            format_hint("style", meta.style_notes),
            format_hint("specialty", meta.specialty),
            "",
            *(
                format_code_item(CodeItem(code, catalog.entries[code]))
                for code in target_codes
            ),
        ]
    )
    note = gateway.chat(
        ChatRequest(
            system_prompt=system_prompt("system_note", version),
            user_prompt=note_prompt,
            schema_id="NOTE_TEXT",
            seed=seed,
        )
    )
    lines = tuple(note.payload["lines"])

    chart_id = "icd-" + content_hash(domain, seed_code, *target_codes, *lines)[:16]
    inputs_hash = content_hash(meta.source_id, domain, str(seed))
    for event in pending_events:
        audit.emit(
            stage="generate",
            chart_id=chart_id,
            inputs_hash=inputs_hash,
            outputs_hash=content_hash(event["code"]),
            reason=event["reason"],
        )

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
        raise PhiFilterRejection(
            f"chart {chart_id} quarantined", findings=findings
        )

    chart = ClinicalChart(
        chart_id=chart_id,
        lines=lines,
        seed_code=seed_code,
        target_codes=target_codes,
        domain_tags=(domain,),
        provenance=Provenance(
            meta_source_id=meta.source_id,
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
        candidates=[(code, None) for code in offered],
    )
    return chart


def label_icd_chart(
    chart: ClinicalChart,
    index,
    embedder,
    gateway,
    audit: AuditLog | None = None,
    review_queue: list | None = None,
    top_n: int = DEFAULT_TOP_N,
    min_score: float = DEFAULT_MIN_SCORE,
    window: int = 1,
    stride: int = 1,
    source: str = "GOLD",
    version: str = "v1",
) -> list[CodeAssignment]:
    """Retrieval-constrained line labeling. Empty output is valid."""
    audit = audit or AuditLog()
    index.check_provider(embedder.provider_id)
    desc_of = dict(zip(index.codes, index.descriptions))
    system = system_prompt("system_icd_label", version)
    lines = list(chart.lines)

    merged: dict[str, CodeAssignment] = {}
    order: list[str] = []
    all_candidates: list[tuple[str, float]] = []
    for start in range(0, len(lines), stride):
        span = list(range(start, min(start + window, len(lines))))
        text = " ".join(lines[i] for i in span)
        vector = embedder.embed([text])[0]
        retrieved = query_top_n(index, vector, top_n).candidates
        all_candidates.extend(retrieved)
        if not retrieved:
            continue
        prompt = "\n".join(
            [
                format_hint("min_score", f"{min_score:.2f}"),
                "",
                format_note_lines([lines[i] for i in span], indices=span),
                "",
                *(
                    format_code_item(CodeItem(code, desc_of[code], score=score))
                    for code, score in retrieved
                ),
            ]
        )
        result = gateway.chat(
            ChatRequest(
                system_prompt=system,
                user_prompt=prompt,
                schema_id="ICD_ASSIGNMENTS",
                seed=stable_seed(chart.chart_id, start),
            )
        )
        candidate_codes = {code for code, _ in retrieved}
        for item in result.payload:
            code = item["code"]
            if code not in candidate_codes:
                entry = {
                    "chart_id": chart.chart_id,
                    "code": code,
                    "rationale": item.get("rationale", ""),
                    "window_start": start,
                    "status": "suggested non-candidate code",
                }
                if review_queue is not None:
                    review_queue.append(entry)
                audit.emit(
                    stage="label",
                    chart_id=chart.chart_id,
                    inputs_hash=content_hash(chart.chart_id, str(start)),
                    outputs_hash=content_hash(code),
                    reason="suggested non-candidate code",
                )
                continue
            evidence = frozenset(
                i for i in item["evidence"]["line_index"] if 0 <= i < len(lines)
            ) or frozenset(span)
            if code in merged:
                prior = merged[code]
                merged[code] = CodeAssignment(
                    code, prior.rationale, prior.evidence_lines | evidence, source
                )
            else:
                merged[code] = CodeAssignment(
                    code, item.get("rationale", ""), evidence, source
                )
                order.append(code)

    assignments = [merged[code] for code in order]
    audit.emit(
        stage="label",
        chart_id=chart.chart_id,
        inputs_hash=content_hash(chart.chart_id, index.provider_id),
        outputs_hash=json_hash([a.to_dict() for a in assignments]),
        candidates=all_candidates,
        reason="empty assignment list" if not assignments else None,
    )
    return assignments


def stable_seed(chart_id: str, step: int) -> int:
    """Per-call gateway seed that varies across a chart's label calls."""
    return stable_hash64(f"{chart_id}/{step}") % (2**31)
