"""Synthetic chart pipeline tests.

Retrieval-dependent expectations (which code a description or note line
resolves to) are verified against a brute-force cosine oracle computed
directly from the embedder, independent of the index implementation,
before the pipeline's answer is asserted.
"""

import hashlib
import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import bundled_data
from medcodeflow.codeindex import build_index, query_top_n
from medcodeflow.embedding import TokenHashEmbedder
from medcodeflow.errors import (
    EmptyPool,
    PhiFilterRejection,
    ProviderMismatch,
    SecureContextViolation,
    UnknownSpecialty,
)
from medcodeflow.gateway import ChatGateway, GatewayConfig, MockChatProvider
from medcodeflow.jsonl import read_jsonl
from medcodeflow.synthgen import (
    DETERMINISTIC_CREATED_AT,
    AuditLog,
    ClinicalChart,
    CorpusConfig,
    Discard,
    MetaDescription,
    Provenance,
    derive_meta,
    generate_cpt_note,
    generate_icd_chart,
    label_cpt_note,
    label_icd_chart,
    leakage_screen,
    load_domain_pools,
    load_meta_fixtures,
    phi_findings,
    relabel_corpus,
    require_secure_context,
    run_corpus,
    screen_lines,
    token_shingles,
)
from medcodeflow.synthgen.meta import SECURE_MARKER
from medcodeflow.taxonomy import load_catalog

ICD_CATALOG = load_catalog(bundled_data("icd10cm_catalog.tsv"))
CPT_CATALOG = load_catalog(bundled_data("cpt_catalog.tsv"))
EMBEDDER = TokenHashEmbedder()
ICD_INDEX = build_index(ICD_CATALOG, EMBEDDER)
CPT_INDEX = build_index(CPT_CATALOG, EMBEDDER)
POOLS = load_domain_pools(catalog=ICD_CATALOG)
METAS = load_meta_fixtures()


def gateway(profile="clean", script=None):
    return ChatGateway(MockChatProvider(script_path=script, profile=profile), GatewayConfig())


def script_file(tmp_path, *entries):
    path = tmp_path / "script.jsonl"
    with open(path, "w", encoding="utf-8") as fh:
        for entry in entries:
            fh.write(json.dumps(entry) + "\n")
    return path


def make_chart(lines, chart_id="chart-under-test", seed_code="E119"):
    return ClinicalChart(
        chart_id=chart_id,
        lines=tuple(lines),
        seed_code=seed_code,
        target_codes=(seed_code,),
        domain_tags=("General",),
        provenance=Provenance("meta-x", "mock-chat:clean", DETERMINISTIC_CREATED_AT, "0.1.0"),
    )


def brute_force_ranking(catalog, text):
    """Cosine against every catalog description, computed from scratch."""
    query = EMBEDDER.embed([text])[0].astype(np.float64)
    scored = []
    for code in catalog.codes():
        vec = EMBEDDER.embed([catalog.entries[code]])[0].astype(np.float64)
        scored.append((code, float(query @ vec)))
    return sorted(scored, key=lambda cs: (-cs[1], cs[0]))


# -------------------------------------------------------------- phi filter


def test_phi_digit_run_detects_phone():
    findings = phi_findings("Call 415-555-0123 after discharge.")
    assert any(f["rule"] == "digit_run" for f in findings)


def test_phi_dob_keyword_detected():
    findings = phi_findings("Date of birth: 04/12/1958, confirmed at intake.")
    assert any(f["rule"] == "dob" for f in findings)


def test_phi_surname_match_is_case_sensitive():
    assert any(f["rule"] == "surname" for f in phi_findings("Daughter Garcia at bedside."))
    assert phi_findings("Patient ambulates with walker daily.") == []


def test_phi_clean_clinical_text_passes():
    assert phi_findings("Examination is consistent with chronic kidney disease.") == []


def test_screen_lines_reports_line_indices():
    with pytest.raises(PhiFilterRejection) as exc:
        screen_lines(["Stable overnight.", "MRN 12345678 reviewed."], "unit test")
    assert [f["line_index"] for f in exc.value.findings] == [1]


@given(st.integers(min_value=1_000_000, max_value=10**12 - 1), st.sampled_from(["", " ", "-", "."]))
def test_phi_digit_run_catches_any_long_run(number, sep):
    text = sep.join(str(number))
    assert any(f["rule"] == "digit_run" for f in phi_findings(f"id {text} on file"))


# ----------------------------------------------------------------- leakage


SOURCE_NOTE = (
    "The patient was seen in clinic today and reported progressive "
    "shortness of breath on exertion over two weeks."
)


def test_token_shingles_require_full_window():
    assert token_shingles("one two three", n=12) == frozenset()
    assert len(token_shingles(SOURCE_NOTE, n=12)) > 0


def test_leakage_screen_flags_copied_passage():
    copied = make_chart(
        ["patient was seen in clinic today and reported progressive shortness of breath"],
        chart_id="leaky",
    )
    # self-check: the copied line really shares a 12-token shingle
    assert token_shingles("\n".join(copied.lines)) & token_shingles(SOURCE_NOTE)
    violations = leakage_screen([copied], [SOURCE_NOTE])
    assert [v["chart_id"] for v in violations] == ["leaky"]


def test_leakage_screen_passes_reworded_text():
    clean = make_chart(
        ["Presents with two weeks of exertional dyspnea, progressive in nature, seen urgently."],
        chart_id="clean",
    )
    assert leakage_screen([clean], [SOURCE_NOTE]) == []


# ---------------------------------------------------------- meta derivation


def secure_dir(tmp_path):
    (tmp_path / SECURE_MARKER).touch()
    return tmp_path


def test_require_secure_context(tmp_path):
    with pytest.raises(SecureContextViolation):
        require_secure_context(tmp_path)
    (tmp_path / SECURE_MARKER).touch()
    assert require_secure_context(tmp_path) == tmp_path


def test_derive_meta_extracts_structure(tmp_path):
    source = "HPI:\nWorsening cough.\nAssessment:\nBronchitis.\nPlan:\nSupportive care."
    meta = derive_meta(source, gateway(), secure_dir(tmp_path))
    assert meta.structure == ("HPI", "Assessment", "Plan")


def test_derive_meta_distinct_source_ids(tmp_path):
    ctx = secure_dir(tmp_path)
    a = derive_meta("HPI:\nCough.", gateway(), ctx)
    b = derive_meta("HPI:\nFever.", gateway(), ctx)
    assert a.source_id != b.source_id


def test_derive_meta_rejects_identifying_output(tmp_path):
    script = script_file(
        tmp_path,
        {
            "schema_id": "META_DESCRIPTION",
            "tag": "*",
            "response": {
                "structure": ["HPI"],
                "style_notes": "callback 415 555 0123 preferred",
                "specialty": "internal_medicine",
            },
        },
    )
    audit = AuditLog()
    with pytest.raises(PhiFilterRejection):
        derive_meta("HPI:\nCough.", gateway(script=script), secure_dir(tmp_path), audit=audit)
    assert audit.records[-1].discarded
    assert "phi" in audit.records[-1].reason


def test_derive_meta_refuses_unmarked_directory(tmp_path):
    with pytest.raises(SecureContextViolation):
        derive_meta("HPI:\nCough.", gateway(), tmp_path)


# ------------------------------------------------------- icd chart pipeline


def test_icd_seed_code_drawn_from_domain_pool():
    chart = generate_icd_chart(
        METAS[0], ICD_CATALOG, gateway(), seed=5, domain="Frailty", pools=POOLS
    )
    assert chart.seed_code in POOLS["Frailty"]
    assert chart.seed_code in chart.target_codes
    assert chart.lines and chart.chart_id.startswith("icd-")


def test_icd_chart_deterministic_for_fixed_inputs():
    charts = [
        generate_icd_chart(METAS[1], ICD_CATALOG, gateway(), seed=9, domain="SDoH", pools=POOLS)
        for _ in range(2)
    ]
    assert charts[0] == charts[1]


def test_icd_invalid_cooccurring_code_dropped(tmp_path):
    script = script_file(
        tmp_path,
        {"schema_id": "CODE_SELECTION", "tag": "icd-cooccur", "response": {"codes": ["ZZZ99", "I10"]}},
    )
    audit = AuditLog()
    chart = generate_icd_chart(
        METAS[0], ICD_CATALOG, gateway(script=script), seed=5, domain="Frailty",
        pools=POOLS, audit=audit,
    )
    assert "ZZZ99" not in chart.target_codes
    assert "I10" in chart.target_codes
    reasons = [r.reason for r in audit.for_chart(chart.chart_id)]
    assert "invalid co-occurring code" in reasons


def test_icd_empty_pool_raises():
    with pytest.raises(EmptyPool):
        generate_icd_chart(
            METAS[0], ICD_CATALOG, gateway(), seed=5, domain="Frailty", pools={"Frailty": []}
        )


def test_icd_generated_note_with_identifier_quarantined(tmp_path):
    script = script_file(
        tmp_path,
        {
            "schema_id": "NOTE_TEXT",
            "tag": "note-gen",
            "response": {"lines": ["History:", "Reached at 415-555-0123 for follow-up."]},
        },
    )
    audit = AuditLog()
    with pytest.raises(PhiFilterRejection):
        generate_icd_chart(
            METAS[0], ICD_CATALOG, gateway(script=script), seed=5, domain="Frailty",
            pools=POOLS, audit=audit,
        )
    last = audit.records[-1]
    assert last.discarded and last.chart_id.startswith("icd-")


# ---------------------------------------------------------- icd labeling


DIABETES_LINE = "Type 2 diabetes mellitus without complications"


def test_label_single_line_selects_brute_force_top_candidate():
    ranking = brute_force_ranking(ICD_CATALOG, DIABETES_LINE)
    top_code, top_score = ranking[0]
    assert top_code == "E119"
    assert top_score >= 0.30
    assert ranking[1][1] < top_score  # strict winner, no tie to worry about

    chart = make_chart([DIABETES_LINE])
    assignments = label_icd_chart(chart, ICD_INDEX, EMBEDDER, gateway(), audit=AuditLog())
    assert [a.code for a in assignments] == ["E119"]
    assert assignments[0].evidence_lines == frozenset({0})
    assert assignments[0].source == "GOLD"


def test_label_noncandidate_suggestion_routed_to_review(tmp_path):
    retrieved = query_top_n(ICD_INDEX, EMBEDDER.embed([DIABETES_LINE])[0], 10).candidates
    outside = next(c for c in ICD_CATALOG.codes() if c not in {code for code, _ in retrieved})
    script = script_file(
        tmp_path,
        {
            "schema_id": "ICD_ASSIGNMENTS",
            "tag": "icd-label",
            "response": [
                {"code": outside, "rationale": "sounds plausible", "evidence": {"line_index": [0]}}
            ],
        },
    )
    audit = AuditLog()
    queue = []
    assignments = label_icd_chart(
        make_chart([DIABETES_LINE]), ICD_INDEX, EMBEDDER, gateway(script=script),
        audit=audit, review_queue=queue,
    )
    assert assignments == []
    assert [entry["code"] for entry in queue] == [outside]
    assert any(r.reason == "suggested non-candidate code" for r in audit.records)


def test_label_merges_evidence_for_repeated_code():
    chart = make_chart([DIABETES_LINE, DIABETES_LINE])
    assignments = label_icd_chart(chart, ICD_INDEX, EMBEDDER, gateway(), audit=AuditLog())
    merged = {a.code: a.evidence_lines for a in assignments}
    assert merged["E119"] == frozenset({0, 1})


def test_label_empty_output_is_valid_and_audited(tmp_path):
    script = script_file(
        tmp_path, {"schema_id": "ICD_ASSIGNMENTS", "tag": "icd-label", "response": []}
    )
    audit = AuditLog()
    assignments = label_icd_chart(
        make_chart([DIABETES_LINE]), ICD_INDEX, EMBEDDER, gateway(script=script), audit=audit
    )
    assert assignments == []
    assert audit.records[-1].reason == "empty assignment list"


def test_label_refuses_mismatched_embedding_provider():
    with pytest.raises(ProviderMismatch):
        label_icd_chart(
            make_chart([DIABETES_LINE]), ICD_INDEX, TokenHashEmbedder(dim=128), gateway()
        )


# ------------------------------------------------------- cpt note pipeline


def test_cpt_seed_sampled_from_specialty_range():
    note = generate_cpt_note(CPT_CATALOG, "radiology", gateway(), seed=3)
    ranges = [r for r in CPT_CATALOG.specialty_ranges if r.label == "radiology"]
    assert any(r.contains(note.seed_code) for r in ranges)


def test_cpt_unknown_specialty_rejected():
    with pytest.raises(UnknownSpecialty):
        generate_cpt_note(CPT_CATALOG, "astrology", gateway(), seed=3)


def test_cpt_note_deterministic_for_fixed_inputs():
    notes = [generate_cpt_note(CPT_CATALOG, "surgery", gateway(), seed=8) for _ in range(2)]
    assert notes[0] == notes[1]


ECG_CODE = "93000"


def test_cpt_description_resolves_to_brute_force_top_candidate():
    description = CPT_CATALOG.entries[ECG_CODE]
    ranking = brute_force_ranking(CPT_CATALOG, description)
    assert ranking[0][0] == ECG_CODE
    assert ranking[0][1] >= 0.30

    chart = make_chart([f"Procedure performed: {description}."], seed_code=ECG_CODE)
    result = label_cpt_note(chart, CPT_INDEX, EMBEDDER, gateway(), audit=AuditLog())
    assert not isinstance(result, Discard)
    assert [a.code for a in result] == [ECG_CODE]
    assert result[0].rationale == description
    assert result[0].evidence_lines == frozenset()


def test_cpt_unresolvable_description_discards(tmp_path):
    phrase = "zzz qqq xyzzy plugh"
    ranking = brute_force_ranking(CPT_CATALOG, phrase)
    assert ranking[0][1] < 0.30  # nothing in the catalog comes close
    script = script_file(
        tmp_path,
        {"schema_id": "DESCRIPTION_LIST", "tag": "cpt-desc", "response": {"descriptions": [phrase]}},
    )
    audit = AuditLog()
    chart = make_chart(["Procedure performed: something."], seed_code=ECG_CODE)
    result = label_cpt_note(chart, CPT_INDEX, EMBEDDER, gateway(script=script), audit=audit)
    assert isinstance(result, Discard)
    assert audit.records[-1].discarded
    assert "resolved" in result.reason


def test_cpt_note_without_procedures_discards():
    chart = make_chart(["Indication:", "Counseling visit only."], seed_code=ECG_CODE)
    result = label_cpt_note(chart, CPT_INDEX, EMBEDDER, gateway(), audit=AuditLog())
    assert isinstance(result, Discard)


def test_cpt_selection_violation_reasked_then_discarded(tmp_path):
    script = script_file(
        tmp_path,
        {"schema_id": "CODE_SELECTION", "tag": "cpt-select", "response": {"codes": ["99999"]}},
        {"schema_id": "CODE_SELECTION", "tag": "cpt-select", "response": {"codes": ["99999"]}},
    )
    audit = AuditLog()
    chart = make_chart([f"Procedure performed: {CPT_CATALOG.entries[ECG_CODE]}."], seed_code=ECG_CODE)
    result = label_cpt_note(chart, CPT_INDEX, EMBEDDER, gateway(script=script), audit=audit)
    assert isinstance(result, Discard)
    assert "twice" in result.reason
    violations = [r for r in audit.records if r.reason == "selection outside candidate set"]
    assert len(violations) == 2


def test_cpt_selection_reask_accepts_second_answer(tmp_path):
    script = script_file(
        tmp_path,
        {"schema_id": "CODE_SELECTION", "tag": "cpt-select", "response": {"codes": ["99999"]}},
        {"schema_id": "CODE_SELECTION", "tag": "cpt-select", "response": {"codes": [ECG_CODE]}},
    )
    chart = make_chart([f"Procedure performed: {CPT_CATALOG.entries[ECG_CODE]}."], seed_code=ECG_CODE)
    result = label_cpt_note(chart, CPT_INDEX, EMBEDDER, gateway(script=script), audit=AuditLog())
    assert not isinstance(result, Discard)
    assert [a.code for a in result] == [ECG_CODE]


# ------------------------------------------------------- corpus orchestration


def corpus_digest(out_dir):
    h = hashlib.sha256()
    for name in ("charts.jsonl", "gold.jsonl", "audit.jsonl", "diagnostics.json"):
        h.update(Path(out_dir, name).read_bytes())
    return h.hexdigest()


def run_icd_corpus(out_dir, counts, seed=11, gw=None):
    config = CorpusConfig(out_dir=out_dir, icd_counts=counts, seed=seed)
    gw = gw or gateway()
    return run_corpus(config, ICD_CATALOG, gw, EMBEDDER, ICD_INDEX), gw


def test_corpus_config_requires_exactly_one_system(tmp_path):
    with pytest.raises(ValueError):
        CorpusConfig(out_dir=tmp_path)
    with pytest.raises(ValueError):
        CorpusConfig(out_dir=tmp_path, icd_counts={"Frailty": 1}, cpt_counts={"surgery": 1})


def test_run_corpus_accounting_identity(tmp_path):
    diag, _ = run_icd_corpus(tmp_path / "run", {"Frailty": 10})
    charts = list(read_jsonl(tmp_path / "run" / "charts.jsonl"))
    assert diag["attempted"] == 10
    assert diag["retained"] == len(charts)
    assert diag["retained"] + diag["discarded"] == 10
    assert len(diag["discards"]) == diag["discarded"]
    assert diag["discard_rate"] == diag["discarded"] / diag["attempted"]


def test_run_corpus_rerun_byte_identical(tmp_path):
    run_icd_corpus(tmp_path / "a", {"Frailty": 3, "SDoH": 2})
    run_icd_corpus(tmp_path / "b", {"Frailty": 3, "SDoH": 2})
    assert corpus_digest(tmp_path / "a") == corpus_digest(tmp_path / "b")


def test_run_corpus_resume_finishes_remaining_units(tmp_path):
    run_icd_corpus(tmp_path / "partial", {"Frailty": 2})
    _, gw = run_icd_corpus(tmp_path / "partial", {"Frailty": 3})
    resumed_calls = gw.provider.call_count
    run_icd_corpus(tmp_path / "fresh", {"Frailty": 3})
    assert corpus_digest(tmp_path / "partial") == corpus_digest(tmp_path / "fresh")
    # the resumed run only paid for the one missing unit
    _, gw_unit = run_icd_corpus(tmp_path / "unit", {"Frailty": 1})
    assert resumed_calls <= gw_unit.provider.call_count + 2


def test_run_corpus_gold_is_catalog_valid_with_in_range_evidence(tmp_path):
    run_icd_corpus(tmp_path / "run", {"Frailty": 4, "AdvancedIllness": 3})
    lines_of = {c["chart_id"]: len(c["lines"]) for c in read_jsonl(tmp_path / "run" / "charts.jsonl")}
    for rec in read_jsonl(tmp_path / "run" / "gold.jsonl"):
        for assignment in rec["assignments"]:
            assert assignment["code"] in ICD_CATALOG.entries
            assert all(0 <= i < lines_of[rec["chart_id"]] for i in assignment["evidence_lines"])


def test_run_corpus_audit_stages_in_pipeline_order(tmp_path):
    run_icd_corpus(tmp_path / "run", {"SDoH": 3})
    stages: dict[str, list[str]] = {}
    discarded = set()
    for rec in read_jsonl(tmp_path / "run" / "audit.jsonl"):
        stages.setdefault(rec["chart_id"], []).append(rec["stage"])
        if rec["discarded"]:
            discarded.add(rec["chart_id"])
    retained = {c["chart_id"] for c in read_jsonl(tmp_path / "run" / "charts.jsonl")}
    assert retained.isdisjoint(discarded)
    for chart_id in retained:
        seen = stages[chart_id]
        assert "generate" in seen and "label" in seen
        assert seen.index("generate") < seen.index("label")


def test_run_corpus_cpt_discards_itemized(tmp_path):
    script = script_file(
        tmp_path,
        {"schema_id": "DESCRIPTION_LIST", "tag": "cpt-desc", "response": {"descriptions": ["zzz qqq xyzzy plugh"]}},
    )
    config = CorpusConfig(out_dir=tmp_path / "run", cpt_counts={"medicine": 4}, seed=2)
    diag = run_corpus(config, CPT_CATALOG, gateway(script=script), EMBEDDER, CPT_INDEX)
    assert diag["attempted"] == 4
    assert diag["retained"] == 0
    assert diag["discarded"] == 4
    assert len(diag["discards"]) == 4
    assert all(d["reason"] for d in diag["discards"])
    assert not (tmp_path / "run" / "charts.jsonl").exists()


def test_run_corpus_cpt_clean_roundtrip(tmp_path):
    config = CorpusConfig(out_dir=tmp_path / "run", cpt_counts={"radiology": 3}, seed=4)
    diag = run_corpus(config, CPT_CATALOG, gateway(), EMBEDDER, CPT_INDEX)
    assert diag["retained"] == 3
    for rec in read_jsonl(tmp_path / "run" / "gold.jsonl"):
        for assignment in rec["assignments"]:
            assert assignment["code"] in CPT_CATALOG.entries
            assert assignment["evidence_lines"] == []


def test_generated_corpus_leaks_nothing_from_sources(tmp_path):
    sources = [
        "HPI:\nThe patient was seen in clinic today and reported progressive shortness "
        "of breath on exertion over two weeks.\nAssessment:\nLikely bronchitis.\nPlan:\nRest.",
        "Reason for Visit:\nRoutine follow-up of multiple stable chronic conditions "
        "managed in primary care for many years.\nAssessment:\nStable.\nPlan:\nContinue.",
    ]
    ctx = secure_dir(tmp_path)
    gw = gateway()
    metas = [derive_meta(text, gw, ctx) for text in sources]
    charts = [
        generate_icd_chart(meta, ICD_CATALOG, gw, seed=i, domain="General", pools=POOLS)
        for i, meta in enumerate(metas)
    ]
    assert leakage_screen(charts, sources) == []


def test_relabel_covers_every_chart_with_valid_codes(tmp_path):
    run_icd_corpus(tmp_path / "run", {"Frailty": 4})
    charts = [ClinicalChart.from_dict(c) for c in read_jsonl(tmp_path / "run" / "charts.jsonl")]
    summary = relabel_corpus(
        charts, ICD_INDEX, EMBEDDER, gateway(profile="noisy"), tmp_path / "pred.jsonl",
        source="PREDICTED",
    )
    rows = list(read_jsonl(tmp_path / "pred.jsonl"))
    assert summary["charts"] == len(charts)
    assert [r["chart_id"] for r in rows] == [c.chart_id for c in charts]
    for rec in rows:
        for assignment in rec["assignments"]:
            assert assignment["code"] in ICD_CATALOG.entries
